//! Heat-kernel operators on the grid and the proximal quantities built from them:
//! the normalizer `eta0`, its reciprocal, the forward heat solution and the score drift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::Mat;
use crate::potentials::Potential;
use crate::tt::{cross, cross_on_grid, Core, CrossOptions, CrossReport, KroneckerOperator, TensorTrain, TtMapTarget};

/// One-dimensional kernel matrices shared by every dimension of an isotropic grid.
#[derive(Debug, Clone)]
pub struct KernelSet {
    t: f64,
    beta: f64,
    dim: usize,
    /// `w_k exp(-beta (x_j - y_k)^2 / (4T) - s_j)`
    value: Mat,
    /// value entry times `-beta (x_j - y_k) / (2T)`
    grad: Mat,
    /// Row exponents `s_j` factored out of `value` and `grad`.
    log_stabilizers: Vec<f64>,
}

impl KernelSet {
    pub fn new(grid: &Grid, t: f64, beta: f64) -> Result<KernelSet> {
        if !(t > 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidArgument(format!("proximal time and beta must be positive (T={t}, beta={beta})")));
        }
        let z = grid.nodes();
        let w = grid.weights();
        let n = z.len();
        let exponent = |j: usize, k: usize| -beta * (z[j] - z[k]).powi(2) / (4.0 * t);
        let log_stabilizers: Vec<f64> = (0..n).map(|j| (0..n).map(|k| exponent(j, k)).fold(f64::NEG_INFINITY, f64::max)).collect();
        let value = Mat::from_fn(n, n, |j, k| w[k] * (exponent(j, k) - log_stabilizers[j]).exp());
        let grad = Mat::from_fn(n, n, |j, k| value[(j, k)] * (-beta * (z[j] - z[k]) / (2.0 * t)));
        Ok(KernelSet { t, beta, dim: grid.dim(), value, grad, log_stabilizers })
    }

    pub fn proximal_time(&self) -> f64 {
        self.t
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn log_stabilizers(&self) -> &[f64] {
        &self.log_stabilizers
    }
    pub fn value_entry(&self, j: usize, k: usize) -> f64 {
        self.value[(j, k)]
    }
    pub fn grad_entry(&self, j: usize, k: usize) -> f64 {
        self.grad[(j, k)]
    }

    /// Row `j` of the value matrix applied to a vector of node values.
    pub fn apply_value_1d(&self, f: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(f);
        (&self.value * v).iter().copied().collect()
    }

    pub fn apply_grad_1d(&self, f: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(f);
        (&self.grad * v).iter().copied().collect()
    }

    /// The value matrices as a Kronecker operator.
    pub fn value_operator(&self) -> KroneckerOperator {
        KroneckerOperator::from_mats(vec![self.value.clone(); self.dim])
    }

    pub(crate) fn value_matrix(&self) -> &Mat {
        &self.value
    }

    pub(crate) fn grad_matrix(&self) -> &Mat {
        &self.grad
    }
}

/// How `eta_hat_0 = rho_0 / eta0` is formed each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuotientMode {
    /// Hadamard product with the precomputed reciprocal, then rounding.
    Hadamard,
    /// Cross approximation of `rho_0 / max(eta0, floor)` directly.
    Cross,
}

impl std::str::FromStr for QuotientMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hadamard" => Ok(QuotientMode::Hadamard),
            "cross" => Ok(QuotientMode::Cross),
            o => Err(Error::Parse(format!("unknown quotient mode '{o}'"))),
        }
    }
}

impl std::fmt::Display for QuotientMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QuotientMode::Hadamard => "hadamard",
            QuotientMode::Cross => "cross",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Eta0Options {
    pub cross: CrossOptions,
    /// Values of `eta0` below `floor * max(eta0)` are clamped (0 disables clamping and makes
    /// nonpositive values an error).
    pub floor: f64,
    /// Skip the reciprocal (only the cross quotient mode is then available).
    pub with_inverse: bool,
}

impl Default for Eta0Options {
    fn default() -> Self {
        Eta0Options { cross: CrossOptions::default(), floor: 0.0, with_inverse: true }
    }
}

#[derive(Debug, Clone)]
pub struct Eta0Report {
    pub target: CrossReport,
    pub inverse: Option<CrossReport>,
    /// Constant subtracted from `beta V / 2` before exponentiating.
    pub log_shift: f64,
    /// Largest `|inv_eta0 * eta0 - 1|` on the validation nodes that are above the floor.
    pub inverse_deviation: f64,
    /// Validation nodes where `eta0` fell below the floor.
    pub clamped_nodes: usize,
}

/// `eta0 = N` on the grid and its reciprocal.
///
/// Both are known only up to the factor `exp(log_shift)`, which cancels in the score.
#[derive(Debug, Clone)]
pub struct ProximalState {
    /// `exp(-beta V / 2 + log_shift)` on the grid.
    pub half_density: TensorTrain,
    pub eta0: TensorTrain,
    pub inv_eta0: Option<TensorTrain>,
    /// Absolute clamp level applied to `eta0` (0 when disabled).
    pub floor: f64,
    pub grid: Grid,
    pub t: f64,
    pub beta: f64,
    pub report: Eta0Report,
}

/// Cross-approximate `exp(-beta V / 2)`, apply the value kernels and build `1 / eta0`.
///
/// The reciprocal is computed as `(1 / G) * cross(G / eta0)` where `G` is the separable
/// function through the largest sampled value of `eta0`; this removes most of the dynamic
/// range of `1 / eta0` before the cross step and is exact for separable normalizers.
pub fn compute_eta0(potential: &dyn Potential, grid: &Grid, kernels: &KernelSet, opts: &Eta0Options) -> Result<ProximalState> {
    let d = grid.dim();
    if potential.dim() != d || kernels.dim() != d {
        return Err(Error::Shape(format!("potential of dimension {} on a {d}-dimensional grid", potential.dim())));
    }
    let beta = kernels.beta();
    let modes = grid.mode_sizes();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.cross.seed ^ 0x5eed_e7a0);
    let random_index = |rng: &mut ChaCha8Rng| -> Vec<usize> { modes.iter().map(|&n| rng.random_range(0..n)).collect() };

    // shift by the smallest sampled exponent so the largest values are O(1)
    let mut probes: Vec<Vec<usize>> = vec![modes.iter().map(|&n| n / 2).collect()];
    probes.extend((0..512).map(|_| random_index(&mut rng)));
    let mut log_shift = f64::INFINITY;
    for idx in &probes {
        let e = beta * potential.value(&grid.point(idx)) / 2.0;
        if e.is_finite() {
            log_shift = log_shift.min(e);
        }
    }
    if !log_shift.is_finite() {
        return Err(Error::InvalidArgument("potential is not finite on any probed node".into()));
    }
    let (half_density, target_report) =
        cross_on_grid(grid, |x| (-beta * potential.value(x) / 2.0 + log_shift).exp(), &opts.cross)?;
    log::info!(
        "exp(-beta V/2) cross: ranks {:?}, residual {:.2e}, {} evaluations",
        target_report.ranks,
        target_report.residual,
        target_report.evaluations
    );
    let eta0 = half_density.apply_kron(&kernels.value_operator())?;

    // validation nodes: positivity and the reference node for the gauge
    let validation: Vec<Vec<usize>> = (0..1000).map(|_| random_index(&mut rng)).collect();
    let mut best = probes[0].clone();
    let mut best_val = eta0.eval_unchecked(&best);
    for idx in validation.iter().chain(&probes) {
        let v = eta0.eval_unchecked(idx);
        if v > best_val {
            best_val = v;
            best = idx.clone();
        }
    }
    if !(best_val > 0.0) {
        return Err(Error::Underflow("eta0 is not positive anywhere on the sampled nodes".into()));
    }
    let floor = opts.floor.max(0.0) * best_val;
    let mut clamped = 0;
    for idx in &validation {
        let v = eta0.eval_unchecked(idx);
        if v <= floor {
            if opts.floor <= 0.0 {
                return Err(Error::Underflow(format!("eta0 = {v:e} at node {idx:?}")));
            }
            clamped += 1;
        }
    }
    if clamped > 0 {
        log::warn!("eta0 clamped to the floor {floor:e} at {clamped} of {} validation nodes", validation.len());
    }

    let mut report = Eta0Report { target: target_report, inverse: None, log_shift, inverse_deviation: 0.0, clamped_nodes: clamped };
    let mut inv_eta0 = None;
    if opts.with_inverse {
        let gauge = gauge_fibers(&eta0, &best, best_val, floor)?;
        let gauge_tt = TensorTrain::rank_one(&gauge);
        let strict = opts.floor <= 0.0;
        let target = TtMapTarget::new(vec![&eta0, &gauge_tt], move |v: &[f64]| {
            if strict && v[0] <= 0.0 {
                f64::NAN
            } else {
                v[1] / v[0].max(floor)
            }
        })?;
        let (q, inv_report) = cross(&target, &modes, &opts.cross).map_err(|e| match e {
            Error::NonFinite { index, .. } => Error::Underflow(format!("eta0 is not positive at node {index:?}")),
            other => other,
        })?;
        let recip: Vec<Vec<f64>> = gauge.iter().map(|g| g.iter().map(|v| 1.0 / v).collect()).collect();
        let inv = scale_modes(&q, &recip);
        let mut dev = 0.0f64;
        for idx in &validation {
            let e = eta0.eval_unchecked(idx);
            if e > floor {
                dev = dev.max((inv.eval_unchecked(idx) * e - 1.0).abs());
            }
        }
        log::info!("1/eta0 cross: ranks {:?}, max |inv*eta0 - 1| = {dev:.2e}", inv_report.ranks);
        report.inverse = Some(inv_report);
        report.inverse_deviation = dev;
        inv_eta0 = Some(inv);
    }

    Ok(ProximalState {
        half_density,
        eta0,
        inv_eta0,
        floor,
        grid: grid.clone(),
        t: kernels.proximal_time(),
        beta,
        report,
    })
}

/// Fibers of `eta` through `center`, normalized so their product equals `eta` at `center`.
fn gauge_fibers(eta: &TensorTrain, center: &[usize], center_val: f64, floor: f64) -> Result<Vec<Vec<f64>>> {
    let d = eta.dim();
    let modes = eta.mode_sizes();
    let mut out = Vec::with_capacity(d);
    let mut idx = center.to_vec();
    for k in 0..d {
        let mut fiber = Vec::with_capacity(modes[k]);
        for i in 0..modes[k] {
            idx[k] = i;
            let mut v = eta.eval_unchecked(&idx);
            if v <= floor {
                if floor <= 0.0 {
                    return Err(Error::Underflow(format!("eta0 = {v:e} at node {idx:?}")));
                }
                v = floor;
            }
            fiber.push(if k == 0 { v } else { v / center_val });
        }
        idx[k] = center[k];
        out.push(fiber);
    }
    Ok(out)
}

/// Multiply mode `k` of a train by the vector `s[k]`.
pub(crate) fn scale_modes(tt: &TensorTrain, s: &[Vec<f64>]) -> TensorTrain {
    let cores = tt
        .cores()
        .iter()
        .zip(s)
        .map(|(c, v)| {
            let (r0, n, r1) = c.shape();
            let mut data = c.data().to_vec();
            for a in 0..r0 {
                for i in 0..n {
                    for b in 0..r1 {
                        data[(a * n + i) * r1 + b] *= v[i];
                    }
                }
            }
            Core::new(r0, n, r1, data).expect("same shape")
        })
        .collect();
    TensorTrain::from_cores(cores).expect("same chain")
}

/// `eta_hat_T` together with the mode-wise gradient cores.
#[derive(Debug, Clone)]
pub struct HeatField {
    pub value: TensorTrain,
    grad_cores: Vec<Core>,
}

impl HeatField {
    /// Gradient component `j` as a full train (value cores with core `j` swapped).
    pub fn gradient_train(&self, j: usize) -> TensorTrain {
        let mut cores = self.value.cores().to_vec();
        cores[j] = self.grad_cores[j].clone();
        TensorTrain::from_cores(cores).expect("same chain")
    }

    pub fn gradient_trains(&self) -> Vec<TensorTrain> {
        (0..self.value.dim()).map(|j| self.gradient_train(j)).collect()
    }

    /// Interpolated value and gradient at a point inside the grid box.
    pub fn eval(&self, grid: &Grid, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.value.dim();
        if x.len() != d {
            return Err(Error::Shape(format!("point of length {} in dimension {d}", x.len())));
        }
        let mut loc = Vec::with_capacity(d);
        for &xk in x {
            loc.push(grid.locate(xk).ok_or_else(|| Error::OutsideGrid(x.to_vec()))?);
        }
        let slice = |core: &Core, (j, t): (usize, f64)| -> Mat {
            let (r0, _, r1) = core.shape();
            Mat::from_fn(r0, r1, |a, b| {
                let lo = core.get(a, j, b);
                if t > 0.0 {
                    (1.0 - t) * lo + t * core.get(a, j + 1, b)
                } else {
                    lo
                }
            })
        };
        let vs: Vec<Mat> = self.value.cores().iter().zip(&loc).map(|(c, &l)| slice(c, l)).collect();
        let mut lefts = Vec::with_capacity(d + 1);
        lefts.push(Mat::from_element(1, 1, 1.0));
        for k in 0..d {
            let next = &lefts[k] * &vs[k];
            lefts.push(next);
        }
        let mut rights = vec![Mat::from_element(1, 1, 1.0); d + 1];
        for k in (0..d).rev() {
            rights[k] = &vs[k] * &rights[k + 1];
        }
        let value = lefts[d][(0, 0)];
        let grad = (0..d)
            .map(|j| {
                let g = slice(&self.grad_cores[j], loc[j]);
                (&lefts[j] * g * &rights[j + 1])[(0, 0)]
            })
            .collect();
        Ok((value, grad))
    }
}

/// Propagate `eta_hat_0` by the heat kernel; the global prefactor is dropped.
pub fn forward_heat(hat_eta0: &TensorTrain, kernels: &KernelSet) -> Result<HeatField> {
    let d = hat_eta0.dim();
    let n = kernels.value_matrix().nrows();
    if hat_eta0.mode_sizes().iter().any(|&m| m != n) || d != kernels.dim() {
        return Err(Error::Shape("kernel size does not match the train".into()));
    }
    let value = hat_eta0.apply_kron(&kernels.value_operator())?;
    let grad_cores = (0..d).map(|k| hat_eta0.apply_one_mode(k, kernels.grad_matrix()).core(k).clone()).collect();
    Ok(HeatField { value, grad_cores })
}

/// Which combination of terms forms the particle velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftForm {
    /// `grad V + beta^-1 grad log rho_T` with `rho_T = exp(-beta V / 2) eta_hat_T`,
    /// i.e. `grad V / 2 + beta^-1 grad eta_hat_T / eta_hat_T`.
    Consistent,
    /// `grad V + beta^-1 grad eta_hat_T / eta_hat_T`.
    Literal,
}

/// Particle drift at `x`; the point is clamped into the box for the grid lookup.
/// Returns the drift and whether clamping happened.
pub fn score_drift(
    x: &[f64],
    field: &HeatField,
    grid: &Grid,
    potential: &dyn Potential,
    beta: f64,
    form: DriftForm,
) -> Result<(Vec<f64>, bool)> {
    let mut xc = x.to_vec();
    let clamped = grid.clamp(&mut xc);
    let (v, g) = field.eval(grid, &xc)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::DensityUnderflow(x.to_vec()));
    }
    let mut grad_v = vec![0.0; x.len()];
    potential.gradient(x, &mut grad_v);
    let c = match form {
        DriftForm::Consistent => 0.5,
        DriftForm::Literal => 1.0,
    };
    let drift = grad_v.iter().zip(&g).map(|(gv, gk)| c * gv + gk / (beta * v)).collect();
    Ok((drift, clamped))
}
