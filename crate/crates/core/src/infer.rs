//! Tests, point estimators and confidence-set membership built on the
//! linear statistics of the white-noise observation.

use crate::bounds::normal_quantile;
use crate::error::{Error, Result};
use crate::geometry::OmegaSet;
use crate::linalg::{dot, Matrix};
use crate::model::{FisherMatrix, Grid, ParamBox, SignalModel};
use crate::scalar::Real;
use crate::simulate::{LogLikelihoodRatio, Observation, ScoreStatistic};

/// `x_α` with `Φ(x_α) = α`; negative for `α < 1/2`.
pub fn normal_quantile_x_alpha<T: Real>(alpha: T) -> Result<T> {
    normal_quantile(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    /// Standardized score statistic against the upper normal critical value.
    ScoreT,
    /// Likelihood ratio against `θ₀ + u_ε` with the exact Gaussian cutoff.
    NeymanPearson,
}

/// `H₀: θ = θ₀` against `H_ε: θ = θ₀ + u_ε`, one-dimensional.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSpec<T> {
    pub theta0: Vec<T>,
    pub u_eps: T,
    pub alpha: T,
    pub kind: TestKind,
}

impl<T: Real> TestSpec<T> {
    pub fn new(theta0: Vec<T>, u_eps: T, alpha: T, kind: TestKind) -> Result<Self> {
        let spec = Self { theta0, u_eps, alpha, kind };
        spec.validate()?;
        Ok(spec)
    }

    /// `u_ε = 0` is accepted for the score test, where it describes the
    /// degenerate pair `H₀ = H_ε`; the likelihood ratio needs a real
    /// separation.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::domain(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        let ok = match self.kind {
            TestKind::ScoreT => self.u_eps >= T::zero(),
            TestKind::NeymanPearson => self.u_eps > T::zero(),
        };
        if !ok || !self.u_eps.is_finite() {
            return Err(Error::domain(format!("u_eps = {} not admissible", self.u_eps)));
        }
        if self.theta0.len() != 1 {
            return Err(Error::Shape { expected: 1, actual: self.theta0.len() });
        }
        Ok(())
    }

    pub fn alternative(&self) -> Vec<T> {
        vec![self.theta0[0] + self.u_eps]
    }
}

#[derive(Debug, Clone)]
enum Statistic<T> {
    /// Score integral and its exact null mean.
    Score {
        stat: ScoreStatistic<T>,
        null_mean: T,
    },
    Ratio(LogLikelihoodRatio<T>),
}

/// A test with everything that does not depend on the data precomputed.
///
/// Each test is written as `reject ⇔ statistic ≥ critical`.
#[derive(Debug, Clone)]
pub struct PreparedTest<T> {
    statistic: Statistic<T>,
    critical: T,
    epsilon: T,
}

impl<T: Real> PreparedTest<T> {
    pub fn new(model: &SignalModel<T>, spec: &TestSpec<T>, grid: &Grid<T>, epsilon: T) -> Result<Self> {
        spec.validate()?;
        if model.dim() != 1 {
            return Err(Error::Shape { expected: 1, actual: model.dim() });
        }
        if !(epsilon > T::zero()) {
            return Err(Error::domain(format!("noise level ε = {epsilon} must be positive")));
        }
        let x_alpha = normal_quantile(spec.alpha)?;
        match spec.kind {
            TestKind::ScoreT => {
                let stat = ScoreStatistic::new(model, &spec.theta0, grid)?;
                // Centering at the exact null mean rather than θ₀√I keeps
                // the level exact for nonlinear signals too; for linear
                // signals the two coincide.
                let null_mean = stat.null_mean()[0];
                Ok(Self { statistic: Statistic::Score { stat, null_mean }, critical: -x_alpha, epsilon })
            }
            TestKind::NeymanPearson => {
                let lr = LogLikelihoodRatio::new(model, &spec.alternative(), &spec.theta0, grid, epsilon)?;
                let rho = lr.rho();
                if !(rho > T::zero()) {
                    return Err(Error::domain("hypotheses give identical signals"));
                }
                let e = epsilon;
                let critical = -rho * rho / (T::lit(2.0) * e * e) - x_alpha * rho / e;
                Ok(Self { statistic: Statistic::Ratio(lr), critical, epsilon })
            }
        }
    }

    pub fn critical(&self) -> T {
        self.critical
    }

    /// Standardized score `(T − E₀T)/ε`, or the log-likelihood ratio.
    pub fn statistic(&self, obs: &Observation<'_, T>) -> Result<T> {
        match &self.statistic {
            Statistic::Score { stat, null_mean } => Ok((stat.eval(obs)?[0] - *null_mean) / self.epsilon),
            Statistic::Ratio(lr) => lr.eval(obs),
        }
    }

    pub fn rejects(&self, obs: &Observation<'_, T>) -> Result<bool> {
        Ok(self.statistic(obs)? >= self.critical)
    }

    /// Mean of [`Self::statistic`] when the data are drawn under `theta`.
    pub fn mean_under(&self, model: &SignalModel<T>, theta: &[T], grid: &Grid<T>) -> Result<T> {
        let s = model.eval_signal(theta, grid)?;
        Ok(match &self.statistic {
            Statistic::Score { stat, null_mean } => (stat.mean_under(&s, grid)[0] - *null_mean) / self.epsilon,
            Statistic::Ratio(lr) => lr.mean_under(&s, grid),
        })
    }
}

/// Score test: reject when `(T − E₀T)/ε ≥ −x_α`.
pub fn run_score_test<T: Real>(obs: &Observation<'_, T>, spec: &TestSpec<T>, model: &SignalModel<T>) -> Result<bool> {
    let spec = TestSpec { kind: TestKind::ScoreT, ..spec.clone() };
    PreparedTest::new(model, &spec, obs.grid, obs.epsilon)?.rejects(obs)
}

/// Neyman-Pearson test: reject when `L(θ₀ + u_ε, θ₀) ≥ −ρ²/2ε² − x_α ρ/ε`.
pub fn run_np_test<T: Real>(obs: &Observation<'_, T>, spec: &TestSpec<T>, model: &SignalModel<T>) -> Result<bool> {
    let spec = TestSpec { kind: TestKind::NeymanPearson, ..spec.clone() };
    PreparedTest::new(model, &spec, obs.grid, obs.epsilon)?.rejects(obs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Mle,
    ScoreOneStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSpec<T> {
    pub kind: EstimatorKind,
    /// Reference point: the one-step expansion point, or the MLE's
    /// likelihood reference.
    pub theta_init: Vec<T>,
    pub search_box: ParamBox<T>,
}

impl<T: Real> EstimatorSpec<T> {
    /// Estimator searching the whole model domain.
    pub fn new(kind: EstimatorKind, theta_init: Vec<T>, model: &SignalModel<T>) -> Self {
        Self { kind, theta_init, search_box: model.domain().clone() }
    }
}

/// Maximizer of the likelihood with a flag for maxima on the box edge.
#[derive(Debug, Clone, PartialEq)]
pub struct MleResult<T> {
    pub theta: Vec<T>,
    pub boundary_hit: bool,
}

/// `θ̂ = θ₀ + I⁻¹(θ₀) ∫ S_θ(t, θ₀) (dY − S(t, θ₀) dt)`.
pub fn score_one_step<T: Real>(obs: &Observation<'_, T>, model: &SignalModel<T>, theta0: &[T]) -> Result<Vec<T>> {
    OneStep::new(model, theta0, obs.grid)?.estimate(obs)
}

/// Maximum-likelihood estimate by a `64^d` scan of the search box followed
/// by golden-section (d = 1) or coordinate (d = 2) refinement and a final
/// Fisher-scoring polish.
pub fn mle_estimate<T: Real>(
    obs: &Observation<'_, T>,
    model: &SignalModel<T>,
    spec: &EstimatorSpec<T>,
) -> Result<MleResult<T>> {
    Mle::new(model, spec)?.fit(obs)
}

/// Anything that maps an observation to a parameter estimate.
pub trait PointEstimator<T>: Send + Sync {
    fn estimate(&self, obs: &Observation<'_, T>) -> Result<Vec<T>>;
}

/// One-step score estimator prepared at `θ₀`.
#[derive(Debug, Clone)]
pub struct OneStep<T> {
    theta0: Vec<T>,
    stat: ScoreStatistic<T>,
}

impl<T: Real> OneStep<T> {
    pub fn new(model: &SignalModel<T>, theta0: &[T], grid: &Grid<T>) -> Result<Self> {
        Ok(Self { theta0: theta0.to_vec(), stat: ScoreStatistic::new(model, theta0, grid)? })
    }

    pub fn fisher(&self) -> &FisherMatrix<T> {
        self.stat.fisher()
    }
}

impl<T: Real> PointEstimator<T> for OneStep<T> {
    fn estimate(&self, obs: &Observation<'_, T>) -> Result<Vec<T>> {
        let step = self.stat.fisher().inverse.matvec(&self.stat.centered(obs)?);
        Ok(self.theta0.iter().zip(step).map(|(&a, b)| a + b).collect())
    }
}

/// Likelihood maximizer over a box, `d ≤ 2`.
#[derive(Debug, Clone)]
pub struct Mle<T> {
    model: SignalModel<T>,
    search_box: ParamBox<T>,
}

const MLE_SCAN: usize = 64;
const MLE_TOL: f64 = 1e-10;

impl<T: Real> Mle<T> {
    pub fn new(model: &SignalModel<T>, spec: &EstimatorSpec<T>) -> Result<Self> {
        let d = model.dim();
        if d > 2 {
            return Err(Error::domain(format!("likelihood search supports d <= 2, got {d}")));
        }
        if spec.search_box.dim() != d {
            return Err(Error::Shape { expected: d, actual: spec.search_box.dim() });
        }
        if spec.theta_init.len() != d {
            return Err(Error::Shape { expected: d, actual: spec.theta_init.len() });
        }
        let dom = model.domain();
        if !(dom.contains(&spec.search_box.lower) && dom.contains(&spec.search_box.upper)) {
            return Err(Error::domain("search box must lie inside the model domain"));
        }
        Ok(Self { model: model.clone(), search_box: spec.search_box.clone() })
    }

    /// `∫ S dY − ‖S‖²/2`, the log-likelihood up to a θ-free constant and
    /// the factor `ε⁻²`.
    fn objective(&self, obs: &Observation<'_, T>, theta: &[T]) -> T {
        let w = obs.grid.cell_width();
        let mut lin = T::zero();
        let mut sq = T::zero();
        for (&t, &dy) in obs.grid.nodes().iter().zip(&obs.increments) {
            let s = self.model.signal_at(t, theta);
            lin += s * dy;
            sq += s * s;
        }
        lin - sq * w / T::lit(2.0)
    }

    pub fn fit(&self, obs: &Observation<'_, T>) -> Result<MleResult<T>> {
        let d = self.model.dim();
        let (lo, hi) = (&self.search_box.lower, &self.search_box.upper);
        let span = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * T::lit(i as f64 / (MLE_SCAN - 1) as f64);
        let mut best = lo.clone();
        let mut best_val = T::neg_infinity();
        let mut idx = vec![0usize; d];
        'scan: loop {
            let th: Vec<T> = (0..d).map(|k| span(k, idx[k])).collect();
            let v = self.objective(obs, &th);
            if v > best_val {
                best_val = v;
                best = th;
            }
            for i in idx.iter_mut() {
                *i += 1;
                if *i < MLE_SCAN {
                    continue 'scan;
                }
                *i = 0;
            }
            break;
        }
        let cell: Vec<T> = (0..d).map(|k| (hi[k] - lo[k]) / T::lit((MLE_SCAN - 1) as f64)).collect();
        let tol = T::lit(MLE_TOL);
        let mut theta = best;
        let mut width: Vec<T> = cell.clone();
        for _cycle in 0..200 {
            let before = theta.clone();
            for k in 0..d {
                let a = (theta[k] - width[k]).max(lo[k]);
                let b = (theta[k] + width[k]).min(hi[k]);
                let mut probe = theta.clone();
                theta[k] = golden_max(a, b, tol, |x| {
                    probe[k] = x;
                    self.objective(obs, &probe)
                });
            }
            let moved = theta.iter().zip(&before).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
            if d == 1 || moved < tol {
                break;
            }
            for w in width.iter_mut() {
                *w = (*w / T::lit(2.0)).max(moved * T::lit(4.0)).max(tol);
            }
        }
        self.polish(obs, &mut theta);
        let boundary_hit = (0..d)
            .any(|k| (theta[k] - lo[k]).abs() <= T::lit(10.0) * tol || (hi[k] - theta[k]).abs() <= T::lit(10.0) * tol);
        Ok(MleResult { theta, boundary_hit })
    }

    /// A few Fisher-scoring steps from the golden-section answer; the value
    /// search only resolves the maximizer to about the square root of
    /// machine precision, the score equation resolves it fully.
    fn polish(&self, obs: &Observation<'_, T>, theta: &mut Vec<T>) {
        let grid = obs.grid;
        for _ in 0..3 {
            let Ok(rows) = self.model.eval_score(theta, grid) else { return };
            let Ok(s) = self.model.eval_signal(theta, grid) else { return };
            let w = grid.cell_width();
            let resid: Vec<T> = obs.increments.iter().zip(&s).map(|(&dy, &v)| dy - v * w).collect();
            let g: Vec<T> = rows.iter().map(|r| dot(r, &resid)).collect();
            let info = gram_rows(&rows, w);
            let Ok(inv) = info.inverse() else { return };
            let step = inv.matvec(&g);
            let cand: Vec<T> = theta.iter().zip(&step).map(|(&a, &b)| a + b).collect();
            let size = step.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            // tiny steps change the objective below its rounding noise, so
            // only larger ones have to prove an improvement
            let tiny = size <= T::lit(1e-6);
            if !self.search_box.contains(&cand) || (!tiny && self.objective(obs, &cand) < self.objective(obs, theta)) {
                return;
            }
            *theta = cand;
            if size <= T::epsilon() * T::lit(4.0) * theta.iter().fold(T::one(), |m, v| m.max(v.abs())) {
                return;
            }
        }
    }
}

impl<T: Real> PointEstimator<T> for Mle<T> {
    fn estimate(&self, obs: &Observation<'_, T>) -> Result<Vec<T>> {
        self.fit(obs).map(|r| r.theta)
    }
}

fn gram_rows<T: Real>(rows: &[Vec<T>], w: T) -> Matrix<T> {
    let d = rows.len();
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = dot(&rows[i], &rows[j]) * w;
        }
    }
    m
}

fn golden_max<T: Real>(mut a: T, mut b: T, tol: T, mut f: impl FnMut(T) -> T) -> T {
    let r = T::lit(0.618_033_988_749_894_9);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / T::lit(2.0);
    // the bracket ends can beat the interior when the maximum sits on them
    [(a, f(a)), (mid, f(mid)), (b, f(b))]
        .into_iter()
        .fold((mid, T::neg_infinity()), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc })
        .0
}

/// Where the confidence set is standardized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Standardize {
    /// `I^{1/2}(θ₀)` at the known center.
    Theta0Known,
    /// `I^{1/2}(θ̂)` at the estimate; not used in bound comparisons.
    Estimated,
}

#[derive(Debug, Clone)]
pub struct ConfidenceSpec<T> {
    pub omega: OmegaSet<T>,
    pub u_eps: T,
    pub standardize_at: Standardize,
}

/// True when `gauge(I^{1/2}(θ₀)(θ̂ − θ)) > u_ε`, i.e. the standardized
/// error leaves `u_ε Ω`.
pub fn confidence_miss<T: Real>(
    estimate: &[T],
    truth: &[T],
    model: &SignalModel<T>,
    spec: &ConfidenceSpec<T>,
    theta0: &[T],
    grid: &Grid<T>,
) -> Result<bool> {
    let at = match spec.standardize_at {
        Standardize::Theta0Known => theta0,
        Standardize::Estimated => estimate,
    };
    let fisher = model.fisher_information(at, grid)?;
    ConfidenceRegion::new(spec, &fisher)?.misses(estimate, truth)
}

/// `u_ε Ω` pulled back through a fixed standardization `I^{1/2}`.
#[derive(Debug, Clone)]
pub struct ConfidenceRegion<T> {
    body: OmegaSet<T>,
    u_eps: T,
}

impl<T: Real> ConfidenceRegion<T> {
    pub fn new(spec: &ConfidenceSpec<T>, fisher: &FisherMatrix<T>) -> Result<Self> {
        if !(spec.u_eps > T::zero()) {
            return Err(Error::domain(format!("u_eps = {} must be positive", spec.u_eps)));
        }
        if spec.omega.dim() != fisher.dim() {
            return Err(Error::Shape { expected: fisher.dim(), actual: spec.omega.dim() });
        }
        Ok(Self { body: spec.omega.affine_image_gauge(&fisher.sqrt)?, u_eps: spec.u_eps })
    }

    pub fn misses(&self, estimate: &[T], truth: &[T]) -> Result<bool> {
        if estimate.len() != truth.len() || estimate.len() != self.body.dim() {
            return Err(Error::Shape { expected: self.body.dim(), actual: estimate.len() });
        }
        let diff: Vec<T> = estimate.iter().zip(truth).map(|(&a, &b)| a - b).collect();
        Ok(!self.body.contains(&diff, self.u_eps))
    }
}
