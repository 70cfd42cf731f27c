//! Parametric signal families `S(t, θ)` on `(0, 1)`, the L₂ quantities built
//! from them, and a numerical audit of the smoothness assumptions.
//!
//! All integrals over `t` use the composite midpoint rule on a uniform
//! [`Grid`]; the simulator integrates against the same nodes, so
//! deterministic and stochastic integrals share one quadrature.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Default number of quadrature cells.
pub const DEFAULT_GRID_N: usize = 4096;

/// Uniform midpoint grid on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    n: usize,
    nodes: Vec<T>,
    weights: Vec<T>,
    cell_width: T,
}

impl<T: Real> Grid<T> {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("grid needs at least one cell"));
        }
        let nf = T::lit(n as f64);
        let cell_width = T::one() / nf;
        let half = T::lit(0.5);
        let nodes = (0..n).map(|i| (T::lit(i as f64) + half) / nf).collect();
        Ok(Self { n, nodes, weights: vec![cell_width; n], cell_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn cell_width(&self) -> T {
        self.cell_width
    }

    /// `∫ f g dt` for functions sampled at the nodes.
    #[inline]
    pub fn inner(&self, f: &[T], g: &[T]) -> T {
        dot(f, g) * self.cell_width
    }

    /// `∫ f² dt`.
    #[inline]
    pub fn norm_sq(&self, f: &[T]) -> T {
        self.inner(f, f)
    }
}

/// Closed axis-aligned box of admissible parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> ParamBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Shape { expected: lower.len(), actual: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::domain("box needs lower < upper in every coordinate"));
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[T]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&x, (&l, &u))| x >= l && x <= u)
    }

    /// True when every coordinate is at least `margin[k]` inside the box.
    pub fn contains_with_margin(&self, theta: &[T], margin: &[T]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(margin)
                .zip(self.lower.iter().zip(&self.upper))
                .all(|((&x, &m), (&l, &u))| x - m >= l && x + m <= u)
    }
}

pub type SignalFn<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;
/// Writes `∂S/∂θ(t, θ)` into the output slice.
pub type ScoreFn<T> = Arc<dyn Fn(T, &[T], &mut [T]) + Send + Sync>;

/// A parametric signal family `S(t, θ)`, `θ ∈ domain ⊂ R^d`.
#[derive(Clone)]
pub struct SignalModel<T> {
    name: String,
    dim: usize,
    domain: ParamBox<T>,
    signal: SignalFn<T>,
    score: Option<ScoreFn<T>>,
    lambda: T,
}

impl<T: fmt::Debug> fmt::Debug for SignalModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SignalModel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("analytic_score", &self.score.is_some())
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl<T: Real> SignalModel<T> {
    pub fn new(
        name: impl Into<String>,
        domain: ParamBox<T>,
        signal: impl Fn(T, &[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), dim: domain.dim(), domain, signal: Arc::new(signal), score: None, lambda: T::one() }
    }

    pub fn with_score(mut self, score: impl Fn(T, &[T], &mut [T]) + Send + Sync + 'static) -> Self {
        self.score = Some(Arc::new(score));
        self
    }

    /// Drops the analytic score so finite differences are used instead.
    pub fn without_score(mut self) -> Self {
        self.score = None;
        self
    }

    pub fn with_lambda(mut self, lambda: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(Error::domain(format!("smoothness exponent {lambda} outside (0, 1]")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &ParamBox<T> {
        &self.domain
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn has_analytic_score(&self) -> bool {
        self.score.is_some()
    }

    /// `S(t, θ)` at a single point; no domain check.
    #[inline]
    pub fn signal_at(&self, t: T, theta: &[T]) -> T {
        (self.signal)(t, theta)
    }

    pub(crate) fn check_theta(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, actual: theta.len() });
        }
        if !self.domain.contains(theta) {
            return Err(Error::domain(format!("θ = {theta:?} outside the parameter box")));
        }
        Ok(())
    }

    /// Finite-difference step per coordinate: `max(1e-5, 1e-5·|θ_k|)`.
    pub fn fd_steps(&self, theta0: &[T]) -> Vec<T> {
        let base = T::lit(1e-5);
        theta0.iter().map(|&x| base.max(base * x.abs())).collect()
    }

    /// Signal values `S(node_i, θ)`.
    pub fn eval_signal(&self, theta: &[T], grid: &Grid<T>) -> Result<Vec<T>> {
        self.check_theta(theta)?;
        Ok(grid.nodes().iter().map(|&t| (self.signal)(t, theta)).collect())
    }

    /// Score rows `∂S/∂θ_k(node_i, θ₀)`, one row per parameter coordinate.
    ///
    /// Uses the analytic score when present and central differences
    /// otherwise.
    pub fn eval_score(&self, theta0: &[T], grid: &Grid<T>) -> Result<Vec<Vec<T>>> {
        self.check_theta(theta0)?;
        let d = self.dim;
        let n = grid.n();
        let mut rows = vec![vec![T::zero(); n]; d];
        if let Some(score) = &self.score {
            let mut buf = vec![T::zero(); d];
            for (i, &t) in grid.nodes().iter().enumerate() {
                score(t, theta0, &mut buf);
                for k in 0..d {
                    rows[k][i] = buf[k];
                }
            }
            return Ok(rows);
        }
        let steps = self.fd_steps(theta0);
        if !self.domain.contains_with_margin(theta0, &steps) {
            return Err(Error::domain(format!(
                "θ₀ = {theta0:?} too close to the boundary for the finite-difference stencil"
            )));
        }
        let mut plus = theta0.to_vec();
        let mut minus = theta0.to_vec();
        for k in 0..d {
            // the representable step actually taken
            plus[k] = theta0[k] + steps[k];
            minus[k] = theta0[k] - steps[k];
            let width = plus[k] - minus[k];
            for (i, &t) in grid.nodes().iter().enumerate() {
                rows[k][i] = ((self.signal)(t, &plus) - (self.signal)(t, &minus)) / width;
            }
            plus[k] = theta0[k];
            minus[k] = theta0[k];
        }
        Ok(rows)
    }

    /// `∫ S_θ S_θ' dt` without the positive-definiteness check.
    pub fn information_matrix(&self, theta0: &[T], grid: &Grid<T>) -> Result<Matrix<T>> {
        let rows = self.eval_score(theta0, grid)?;
        Ok(gram(&rows, grid))
    }

    /// Fisher information at `θ₀`, with its symmetric square root and
    /// inverse square root.
    pub fn fisher_information(&self, theta0: &[T], grid: &Grid<T>) -> Result<FisherMatrix<T>> {
        let matrix = self.information_matrix(theta0, grid)?;
        FisherMatrix::from_matrix(theta0.to_vec(), matrix)
    }

    /// `ρ(θ₁, θ₀) = ‖S(·, θ₁) − S(·, θ₀)‖`.
    pub fn rho_distance(&self, theta1: &[T], theta0: &[T], grid: &Grid<T>) -> Result<T> {
        self.check_theta(theta1)?;
        self.check_theta(theta0)?;
        let s: T = grid
            .nodes()
            .iter()
            .map(|&t| {
                let diff = (self.signal)(t, theta1) - (self.signal)(t, theta0);
                diff * diff
            })
            .sum();
        Ok((s * grid.cell_width()).sqrt())
    }

    /// `∫ (u'(S_θ(t, θ₀) − S_θ(t, θ₀ + h)))² dt`, the exact variance of
    /// `u'(τ − τ_h)` for the score integrals `τ = ∫ S_θ dw`.
    pub fn score_shift_covariance(&self, theta0: &[T], h: &[T], u: &[T], grid: &Grid<T>) -> Result<T> {
        let shifted = offset(theta0, h)?;
        let (a, b) = (self.eval_score(theta0, grid)?, self.eval_score(&shifted, grid)?);
        if u.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, actual: u.len() });
        }
        let diff = project_difference(&a, &b, u, grid.n());
        Ok(grid.norm_sq(&diff))
    }

    /// `E[(h̄'(τ_{h₁} − τ))(v'τ)] = ∫ h̄'(S_θ(θ₀+h₁) − S_θ(θ₀)) · v'S_θ(θ₀) dt`.
    pub fn score_cross_covariance(&self, theta0: &[T], h1: &[T], h_bar: &[T], v: &[T], grid: &Grid<T>) -> Result<T> {
        let shifted = offset(theta0, h1)?;
        let base = self.eval_score(theta0, grid)?;
        let moved = self.eval_score(&shifted, grid)?;
        if v.len() != self.dim || h_bar.len() != self.dim {
            return Err(Error::Shape { expected: self.dim, actual: v.len().min(h_bar.len()) });
        }
        let incr = project_difference(&moved, &base, h_bar, grid.n());
        let proj = project(&base, v, grid.n());
        Ok(grid.inner(&incr, &proj))
    }

    /// Audits the linearization (A2) and information-continuity (A3)
    /// residuals over shrinking radii and fits their log-log orders.
    pub fn check_regularity(&self, theta0: &[T], grid: &Grid<T>, radii: &[T]) -> Result<RegularityReport<T>> {
        self.check_theta(theta0)?;
        if radii.is_empty() {
            return Err(Error::domain("no probe radii"));
        }
        if radii.iter().any(|&r| !(r > T::zero())) || radii.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::domain("probe radii must be positive and strictly decreasing"));
        }
        let d = self.dim;
        let directions = probe_directions::<T>(d);
        let s0 = self.eval_signal(theta0, grid)?;
        let rows0 = self.eval_score(theta0, grid)?;
        let info0 = gram(&rows0, grid);

        let (eigs, _) = info0.symmetric_eigen();
        let max_eig = eigs.last().copied().unwrap_or(T::zero());
        let passes_a1 = max_eig > T::zero() && eigs[0] > T::lit(A1_RELATIVE_FLOOR) * max_eig;

        let mut signal_scale = grid.norm_sq(&s0);
        let mut info_scale = trace(&info0);
        let mut residual_12 = Vec::with_capacity(radii.len());
        let mut residual_14 = Vec::with_capacity(radii.len());
        let mut residual_15 = Vec::with_capacity(radii.len());

        for &r in radii {
            let (mut r12, mut r14, mut r15) = (T::zero(), T::zero(), T::zero());
            for dir in &directions {
                let step: Vec<T> = dir.iter().map(|&c| c * r).collect();
                let theta = offset(theta0, &step)?;
                let s = self
                    .eval_signal(&theta, grid)
                    .map_err(|_| Error::domain(format!("probe radius {r} leaves the parameter box")))?;
                signal_scale = signal_scale.max(grid.norm_sq(&s));

                let lin = project(&rows0, &step, grid.n());
                let linres: Vec<T> = s.iter().zip(&s0).zip(&lin).map(|((&a, &b), &l)| a - b - l).collect();
                r12 = r12.max(grid.norm_sq(&linres));

                let diff: Vec<T> = s.iter().zip(&s0).map(|(&a, &b)| a - b).collect();
                r14 = r14.max((grid.norm_sq(&diff) - info0.quad_form(&step)).abs());

                let info = self
                    .information_matrix(&theta, grid)
                    .map_err(|_| Error::domain(format!("probe radius {r} leaves room for no score stencil")))?;
                info_scale = info_scale.max(trace(&info));
                for v in &directions {
                    r15 = r15.max((info.quad_form(v) - info0.quad_form(v)).abs());
                }
            }
            residual_12.push(r12);
            residual_14.push(r14);
            residual_15.push(r15);
        }

        let floor_signal = T::lit(NOISE_FLOOR) * signal_scale;
        let floor_info = T::lit(NOISE_FLOOR) * info_scale;
        let fit_12 = fit_order(radii, &residual_12, floor_signal);
        let fit_14 = fit_order(radii, &residual_14, floor_signal);
        let fit_15 = fit_order(radii, &residual_15, floor_info);

        let two = T::lit(2.0);
        let tol = T::lit(SLOPE_TOLERANCE);
        let lambda = self.lambda;
        let meets = |fit: Option<T>, want: T| fit.is_none_or(|s| s >= want - tol);
        let passes_a2 = meets(fit_12, two + lambda) && meets(fit_14, two + lambda);
        let passes_a3 = meets(fit_15, lambda);

        Ok(RegularityReport {
            radii: radii.to_vec(),
            residual_12,
            residual_14,
            residual_15,
            fitted_orders: FittedOrders { residual_12: fit_12, residual_14: fit_14, residual_15: fit_15 },
            noise_floor: floor_signal,
            passes_a1,
            passes_a2,
            passes_a3,
        })
    }
}

/// Smallest admissible eigenvalue of `I(θ₀)`, relative to the largest.
pub const A1_RELATIVE_FLOOR: f64 = 1e-10;
/// Allowed shortfall of a fitted log-log order.
pub const SLOPE_TOLERANCE: f64 = 0.25;
/// Residuals below this multiple of the squared signal scale are roundoff.
pub const NOISE_FLOOR: f64 = 1e-12;
/// Minimum number of resolved radii for an order fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Fisher information `I(θ₀) = ∫ S_θ S_θ' dt` with derived matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix<T> {
    pub theta0: Vec<T>,
    pub matrix: Matrix<T>,
    pub sqrt: Matrix<T>,
    pub inv_sqrt: Matrix<T>,
    pub inverse: Matrix<T>,
    /// Ascending eigenvalues of `matrix`.
    pub eigenvalues: Vec<T>,
}

impl<T: Real> FisherMatrix<T> {
    /// Checks the eigenvalue floor and builds square roots by
    /// eigen-decomposition.
    pub fn from_matrix(theta0: Vec<T>, matrix: Matrix<T>) -> Result<Self> {
        let (eigenvalues, _) = matrix.symmetric_eigen();
        let max = eigenvalues.last().copied().unwrap_or(T::zero());
        let min = eigenvalues.first().copied().unwrap_or(T::zero());
        let floor = T::lit(A1_RELATIVE_FLOOR) * max.max(T::zero());
        if !(min > floor) || !(max > T::zero()) {
            return Err(Error::SingularInformation { min_eigenvalue: min.to_f64_lossy(), floor: floor.to_f64_lossy() });
        }
        let sqrt = matrix.symmetric_map(T::sqrt);
        let inv_sqrt = matrix.symmetric_map(|x| x.sqrt().recip());
        let inverse = matrix.symmetric_map(T::recip);
        Ok(Self { theta0, matrix, sqrt, inv_sqrt, inverse, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// The single entry of a one-parameter information matrix.
    pub fn scalar(&self) -> Result<T> {
        if self.dim() != 1 {
            return Err(Error::Shape { expected: 1, actual: self.dim() });
        }
        Ok(self.matrix[(0, 0)])
    }
}

/// Fitted log-log orders; `None` marks a residual family that never rose
/// above the noise floor at enough radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedOrders<T> {
    pub residual_12: Option<T>,
    pub residual_14: Option<T>,
    pub residual_15: Option<T>,
}

/// Residuals of the smoothness assumptions at shrinking radii.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport<T> {
    pub radii: Vec<T>,
    /// `‖S(θ) − S(θ₀) − (θ−θ₀)'S_θ‖²`, max over probe directions.
    pub residual_12: Vec<T>,
    /// `|ρ²(θ, θ₀) − (θ−θ₀)'I(θ₀)(θ−θ₀)|`.
    pub residual_14: Vec<T>,
    /// `|v'I(θ)v − v'I(θ₀)v|` over unit probe vectors `v`.
    pub residual_15: Vec<T>,
    pub fitted_orders: FittedOrders<T>,
    pub noise_floor: T,
    pub passes_a1: bool,
    pub passes_a2: bool,
    pub passes_a3: bool,
}

fn gram<T: Real>(rows: &[Vec<T>], grid: &Grid<T>) -> Matrix<T> {
    let d = rows.len();
    let mut m = Matrix::zeros(d);
    for j in 0..d {
        for k in j..d {
            let v = grid.inner(&rows[j], &rows[k]);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    m
}

fn trace<T: Real>(m: &Matrix<T>) -> T {
    (0..m.dim()).map(|i| m[(i, i)]).sum()
}

fn offset<T: Real>(theta0: &[T], h: &[T]) -> Result<Vec<T>> {
    if theta0.len() != h.len() {
        return Err(Error::Shape { expected: theta0.len(), actual: h.len() });
    }
    Ok(theta0.iter().zip(h).map(|(&a, &b)| a + b).collect())
}

/// `Σ_k c_k rows[k]`.
fn project<T: Real>(rows: &[Vec<T>], c: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n];
    for (row, &ck) in rows.iter().zip(c) {
        for (o, &r) in out.iter_mut().zip(row) {
            *o += ck * r;
        }
    }
    out
}

/// `Σ_k c_k (a[k] − b[k])`.
fn project_difference<T: Real>(a: &[Vec<T>], b: &[Vec<T>], c: &[T], n: usize) -> Vec<T> {
    let pa = project(a, c, n);
    let pb = project(b, c, n);
    pa.iter().zip(&pb).map(|(&x, &y)| x - y).collect()
}

/// `±e_k`, plus `±(1,…,1)/√d` when `d > 1`.
fn probe_directions<T: Real>(d: usize) -> Vec<Vec<T>> {
    let mut dirs = Vec::with_capacity(2 * d + 2);
    for k in 0..d {
        for sign in [T::one(), -T::one()] {
            let mut e = vec![T::zero(); d];
            e[k] = sign;
            dirs.push(e);
        }
    }
    if d > 1 {
        let c = T::one() / T::lit(d as f64).sqrt();
        dirs.push(vec![c; d]);
        dirs.push(vec![-c; d]);
    }
    dirs
}

/// Least-squares slope of `ln residual` on `ln r` over resolved points.
pub fn fit_order<T: Real>(radii: &[T], residuals: &[T], floor: T) -> Option<T> {
    let pts: Vec<(T, T)> = radii
        .iter()
        .zip(residuals)
        .filter(|(_, &res)| res > floor && res > T::zero())
        .map(|(&r, &res)| (r.ln(), res.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let n = T::lit(pts.len() as f64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let sxx: T = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == T::zero() {
        return None;
    }
    Some(sxy / sxx)
}

/// Names of the built-in signal families.
pub const BUILTIN_MODELS: [&str; 4] = ["linear-sin", "nonlinear-sin", "ortho-2d", "power-cusp"];

/// Looks up a built-in signal family.
///
/// * `linear-sin`: `θ·√2 sin(πt)`, unit information.
/// * `nonlinear-sin`: `sin(θt)`.
/// * `ortho-2d`: `θ₁√2 sin(πt) + θ₂√2 sin(2πt)`, identity information.
/// * `power-cusp`: `|θ|^{1+γ}·√2 sin(πt)`, non-smooth at `θ = 0` for `γ < 1`.
pub fn builtin_model<T: Real>(name: &str, gamma: Option<T>) -> Result<SignalModel<T>> {
    let ten = T::lit(10.0);
    let model = match name {
        "linear-sin" => SignalModel::new(name, ParamBox::cube(1, -ten, ten)?, |t: T, th: &[T]| {
            th[0] * T::SQRT_2() * (T::PI() * t).sin()
        })
        .with_score(|t: T, _th: &[T], out: &mut [T]| out[0] = T::SQRT_2() * (T::PI() * t).sin()),
        "nonlinear-sin" => SignalModel::new(name, ParamBox::cube(1, -ten, ten)?, |t: T, th: &[T]| (th[0] * t).sin())
            .with_score(|t: T, th: &[T], out: &mut [T]| out[0] = t * (th[0] * t).cos()),
        "ortho-2d" => SignalModel::new(name, ParamBox::cube(2, -ten, ten)?, |t: T, th: &[T]| {
            T::SQRT_2() * (th[0] * (T::PI() * t).sin() + th[1] * (T::TAU() * t).sin())
        })
        .with_score(|t: T, _th: &[T], out: &mut [T]| {
            out[0] = T::SQRT_2() * (T::PI() * t).sin();
            out[1] = T::SQRT_2() * (T::TAU() * t).sin();
        }),
        "power-cusp" => {
            let gamma = gamma.unwrap_or(T::lit(0.2));
            if !(gamma > T::zero()) {
                return Err(Error::domain(format!("power-cusp exponent γ = {gamma} must be positive")));
            }
            let expo = T::one() + gamma;
            SignalModel::new(name, ParamBox::cube(1, -T::one(), T::one())?, move |t: T, th: &[T]| {
                th[0].abs().powf(expo) * T::SQRT_2() * (T::PI() * t).sin()
            })
            .with_score(move |t: T, th: &[T], out: &mut [T]| {
                let x = th[0];
                let slope = if x == T::zero() { T::zero() } else { x.signum() * expo * x.abs().powf(gamma) };
                out[0] = slope * T::SQRT_2() * (T::PI() * t).sin();
            })
        }
        _ => return Err(Error::Unknown { kind: "model", name: name.to_string() }),
    };
    Ok(model)
}
