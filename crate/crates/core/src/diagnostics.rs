//! Invariant monitors, decay-rate estimation and the regime certificate.

use crate::error::{CoreError, Result};
use crate::grid::{SpeciesField, SpeciesVelocityField};
use crate::integrate::SimulationState;
use crate::mixture::{self, BoundCheck, DiffusionTable};
use crate::orthogonal;
use crate::scalar::Real;
use crate::spectral::SpectralWorkspace;

/// Monitoring parameters: the Sobolev order tracked and the sampling
/// cadence in steps (0 = automatic, at least 200 samples per run).
#[derive(Debug, Clone, Copy)]
pub struct MonitorConfig {
    pub s_norm: usize,
    pub cadence: usize,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            s_norm: 2,
            cadence: 0,
        }
    }
}

/// One diagnostic sample.
#[derive(Debug, Clone, Copy)]
pub struct Sample<T: Real> {
    pub t: T,
    /// `|c_tilde|` in L2.
    pub norm_l2: T,
    /// `|c_tilde|` in H^s.
    pub norm_hs: T,
    /// `|c_tilde|` in H^s with the `c_bar^{-1/2}` species weight.
    pub norm_hs_weighted: T,
    /// `|U_tilde|` in H^s, recomputed from the concentrations.
    pub u_tilde_hs_norm: T,
    /// Largest per-species |integral of c_tilde|.
    pub mass_residual: T,
    /// Largest pointwise |species sum of c_tilde|.
    pub sum_zero_residual: T,
    /// Largest pointwise |<c, u_tilde>|.
    pub equimolar_residual: T,
    /// Largest pointwise |div <c, u>| of the reconstructed full velocity.
    pub incompressibility_residual: T,
    /// Smallest concentration over species and points.
    pub min_concentration: T,
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    Incomplete,
    Completed,
    Breach(String),
}

/// Result of a log-linear decay fit.
#[derive(Debug, Clone, Copy)]
pub struct FitResult<T: Real> {
    pub rate: T,
    pub r_squared: T,
}

/// Which recorded norm a fit runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormColumn {
    L2,
    Hs,
    HsWeighted,
}

/// Time series of diagnostic samples plus the fitted decay rate.
#[derive(Debug, Clone)]
pub struct RunRecord<T: Real> {
    pub samples: Vec<Sample<T>>,
    pub fitted_rate: Option<FitResult<T>>,
    pub termination: Termination,
}

impl<T: Real> RunRecord<T> {
    pub fn new() -> Self {
        Self {
            samples: Vec::new(),
            fitted_rate: None,
            termination: Termination::Incomplete,
        }
    }

    pub fn push(&mut self, sample: Sample<T>) {
        if let Some(last) = self.samples.last() {
            debug_assert!(sample.t > last.t, "sample times must increase");
        }
        self.samples.push(sample);
    }

    pub fn terminate(&mut self, termination: Termination) {
        self.termination = termination;
    }

    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// Largest value of a residual column over the run.
    pub fn max_residual(&self, f: impl Fn(&Sample<T>) -> T) -> T {
        let mut m = T::zero();
        for s in &self.samples {
            if f(s) > m {
                m = f(s);
            }
        }
        m
    }

    /// Smallest min-concentration seen over the run.
    pub fn min_concentration(&self) -> T {
        let mut m = T::max_value().unwrap_or(T::from_f64_lossy(f64::MAX));
        for s in &self.samples {
            if s.min_concentration < m {
                m = s.min_concentration;
            }
        }
        m
    }
}

impl<T: Real> Default for RunRecord<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Evaluates every residual and norm of one state.
pub fn monitor_invariants<T: Real>(
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    state: &SimulationState<T>,
    monitor: &MonitorConfig,
) -> Result<Sample<T>> {
    let s = monitor.s_norm;
    let c = orthogonal::total_concentration(&state.c_bar, state.eps, &state.c_tilde);
    let u_tilde_orth = orthogonal::fluctuation_velocity(ws, d, &state.c_bar, state.eps, &state.c_tilde)?;
    let u_tilde = orthogonal::equimolar_velocity(&c, &u_tilde_orth);

    // Full velocity u_i = u_bar + eps * (V_U)_i.
    let n = state.c_tilde.n_species();
    let mut u_full = SpeciesVelocityField::broadcast(&state.u_bar, n);
    for i in 0..n {
        for axis in 0..c.grid().dim() {
            u_full
                .species_mut(i)
                .component_mut(axis)
                .axpy(state.eps, u_tilde.species(i).component(axis));
        }
    }

    let weight: Vec<T> = state
        .c_bar
        .iter()
        .map(|&v| T::one() / v.sqrt())
        .collect();

    Ok(Sample {
        t: state.t,
        norm_l2: ws.sobolev_norm(&state.c_tilde, 0, None),
        norm_hs: ws.sobolev_norm(&state.c_tilde, s, None),
        norm_hs_weighted: ws.sobolev_norm(&state.c_tilde, s, Some(&weight)),
        u_tilde_hs_norm: ws.sobolev_norm_velocity(&u_tilde_orth, s),
        mass_residual: state.c_tilde.max_mean_abs(),
        sum_zero_residual: state.c_tilde.max_species_sum(),
        equimolar_residual: orthogonal::equimolar_residual(&c, &u_tilde),
        incompressibility_residual: orthogonal::incompressibility_residual(ws, &c, &u_full),
        min_concentration: state.min_concentration(),
    })
}

fn column<T: Real>(s: &Sample<T>, which: NormColumn) -> T {
    match which {
        NormColumn::L2 => s.norm_l2,
        NormColumn::Hs => s.norm_hs,
        NormColumn::HsWeighted => s.norm_hs_weighted,
    }
}

/// Least-squares slope of `log(norm)` against `t` over a window, negated.
pub fn fit_decay_rate<T: Real>(
    samples: &[Sample<T>],
    window: (T, T),
    which: NormColumn,
) -> Result<FitResult<T>> {
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for s in samples {
        if s.t < window.0 || s.t > window.1 {
            continue;
        }
        let v = column(s, which);
        if !(v > T::zero()) {
            return Err(CoreError::NonPositiveNorm {
                t: s.t.to_subset().unwrap_or(f64::NAN),
                value: v.to_subset().unwrap_or(f64::NAN),
            });
        }
        ts.push(s.t);
        logs.push(v.ln());
    }
    if ts.len() < 10 {
        return Err(CoreError::InsufficientSamples {
            got: ts.len(),
            need: 10,
        });
    }
    let n = T::from_usize_lossy(ts.len());
    let mut t_mean = T::zero();
    let mut y_mean = T::zero();
    for i in 0..ts.len() {
        t_mean += ts[i];
        y_mean += logs[i];
    }
    t_mean /= n;
    y_mean /= n;
    let mut stt = T::zero();
    let mut sty = T::zero();
    for i in 0..ts.len() {
        let dt = ts[i] - t_mean;
        stt += dt * dt;
        sty += dt * (logs[i] - y_mean);
    }
    let slope = sty / stt;
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for i in 0..ts.len() {
        let fit = y_mean + slope * (ts[i] - t_mean);
        let r = logs[i] - fit;
        ss_res += r * r;
        let dy = logs[i] - y_mean;
        ss_tot += dy * dy;
    }
    let r_squared = if ss_tot > T::from_f64_lossy(1e-300) {
        T::one() - ss_res / ss_tot
    } else {
        T::one()
    };
    Ok(FitResult {
        rate: -slope,
        r_squared,
    })
}

/// Explicit constants certifying the smallness regime.
#[derive(Debug, Clone, Copy)]
pub struct RegimeCertificate<T: Real> {
    pub lambda_a: T,
    pub mu_a: T,
    pub c0: T,
    pub min_c_bar: T,
    pub c_s_param: T,
    pub c_poincare_param: T,
    /// Admissible data size: tight solution of
    /// `C_s d [(1+d)^4 + (1+d)^3] = lambda_a (min c_bar)^2 / 2`.
    pub delta_s: T,
    /// Certified decay rate
    /// `lambda_a (min c_bar)^3 / (4 C_p^2 C_s^2 (1 + delta_s^2)^2)`.
    pub lambda_s: T,
}

/// Left side of the smallness equation.
fn smallness_lhs<T: Real>(c_s: T, delta: T) -> T {
    let one = T::one();
    let p4 = (one + delta).powi(4);
    let p3 = (one + delta).powi(3);
    c_s * delta * (p4 + p3)
}

/// Decay-rate formula at a given `delta_s` (cubic in the minimum
/// equilibrium concentration).
pub fn lambda_s_formula<T: Real>(lambda_a: T, min_c_bar: T, c_p: T, c_s: T, delta_s: T) -> T {
    let four = T::from_f64_lossy(4.0);
    let one = T::one();
    lambda_a * min_c_bar.powi(3)
        / (four * c_p * c_p * c_s * c_s * (one + delta_s * delta_s).powi(2))
}

/// Computes the certificate constants for an equilibrium state.
///
/// `delta_s` is found by bisection on the monotone left side of the
/// smallness equation; the residual at the returned value is below 1e-12.
pub fn compute_certificate<T: Real>(
    c_bar: &[T],
    d: &DiffusionTable<T>,
    c_s_param: T,
    c_poincare_param: T,
) -> RegimeCertificate<T> {
    let gc = mixture::gap_constants(d);
    let mut min_c = c_bar[0];
    let mut c0 = T::zero();
    for &v in c_bar {
        if v < min_c {
            min_c = v;
        }
        c0 += v;
    }
    let target = gc.lambda_a * min_c * min_c / T::from_f64_lossy(2.0);

    let mut lo = T::zero();
    let mut hi = T::one();
    while smallness_lhs(c_s_param, hi) < target {
        hi *= T::from_f64_lossy(2.0);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::from_f64_lossy(2.0);
        if mid == lo || mid == hi {
            break;
        }
        if smallness_lhs(c_s_param, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta_s = (lo + hi) / T::from_f64_lossy(2.0);

    RegimeCertificate {
        lambda_a: gc.lambda_a,
        mu_a: gc.mu_a,
        c0,
        min_c_bar: min_c,
        c_s_param,
        c_poincare_param,
        delta_s,
        lambda_s: lambda_s_formula(gc.lambda_a, min_c, c_poincare_param, c_s_param, delta_s),
    }
}

/// Residual of the smallness equation at the certificate's `delta_s`.
pub fn certificate_residual<T: Real>(cert: &RegimeCertificate<T>) -> T {
    let target = cert.lambda_a * cert.min_c_bar * cert.min_c_bar / T::from_f64_lossy(2.0);
    (smallness_lhs(cert.c_s_param, cert.delta_s) - target).abs()
}

/// Largest increase of the H^s norm between consecutive samples
/// (positive values indicate a monotonicity violation).
pub fn max_hs_increase<T: Real>(samples: &[Sample<T>]) -> T {
    let mut worst = T::from_f64_lossy(-f64::MAX);
    for w in samples.windows(2) {
        let inc = w[1].norm_hs - w[0].norm_hs;
        if inc > worst {
            worst = inc;
        }
    }
    worst
}

/// Largest violation of the discrete energy inequality
/// `d/dt |c~|^2_{H^s(c_bar^{-1/2})} <= -kappa |U~|^2_{H^s}`
/// between consecutive samples, with `kappa = lambda_a (min c_bar)^2 / 2`.
/// Positive values indicate a violation beyond the caller's tolerance.
pub fn max_energy_inequality_violation<T: Real>(samples: &[Sample<T>], kappa: T) -> T {
    let mut worst = T::from_f64_lossy(-f64::MAX);
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        let e0 = w[0].norm_hs_weighted;
        let e1 = w[1].norm_hs_weighted;
        let lhs = (e1 * e1 - e0 * e0) / dt;
        let u = if w[0].u_tilde_hs_norm < w[1].u_tilde_hs_norm {
            w[0].u_tilde_hs_norm
        } else {
            w[1].u_tilde_hs_norm
        };
        let rhs = -kappa * u * u;
        if lhs - rhs > worst {
            worst = lhs - rhs;
        }
    }
    worst
}

/// Supremum over sample times of the exponentially weighted velocity
/// integral
///
/// ```text
/// sup_k  ( sum_{j <= k} exp(2 lambda t_j) |U~(t_j)|^2 dt_j )  /  |c~(0)|^2
/// ```
///
/// the Gronwall form of the integrated velocity estimate. The theorem only
/// bounds this by an unknown constant, so the artifact records the value
/// and checks it stays finite and bounded over the run.
pub fn velocity_integral_sup<T: Real>(samples: &[Sample<T>], lambda: T) -> T {
    if samples.len() < 2 {
        return T::zero();
    }
    let e0 = samples[0].norm_hs_weighted;
    let denom = if e0 > T::zero() { e0 * e0 } else { T::one() };
    let two = T::from_f64_lossy(2.0);
    let mut integral = T::zero();
    let mut sup = T::zero();
    for w in samples.windows(2) {
        let dt = w[1].t - w[0].t;
        let mid_t = (w[0].t + w[1].t) / two;
        let mid_u = (w[0].u_tilde_hs_norm + w[1].u_tilde_hs_norm) / two;
        integral += (two * lambda * mid_t).exp() * mid_u * mid_u * dt;
        let v = integral / denom;
        if v > sup {
            sup = v;
        }
    }
    sup
}

fn sub_indices(alpha: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &a in alpha {
        let mut next = Vec::new();
        for prefix in &out {
            for v in 0..=a {
                let mut w = prefix.clone();
                w.push(v);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

fn order(alpha: &[usize]) -> usize {
    alpha.iter().sum()
}

fn pointwise_species_norm<T: Real>(f: &SpeciesField<T>, p: usize) -> T {
    let mut acc = T::zero();
    for i in 0..f.n_species() {
        let v = f.species(i).data()[p];
        acc += v * v;
    }
    acc.sqrt()
}

/// Checks the commutator estimate for the derivative of `A(c) U` against a
/// fixed species vector `x`:
///
/// ```text
/// <d^a [A(c)U], x> <= <A(c) d^a U, x>
///     + 2 3^|a| N^2 mu_a <c,1> |x| sum_{a1+a3=a, |a1|>=1} |d^a1 c| |d^a3 U|
///     +   3^|a| N^2 mu_a |x| sum_{a1+a2+a3=a, |a1|,|a2|>=1} |d^a1 c| |d^a2 c| |d^a3 U|
/// ```
///
/// evaluated pointwise with spectral derivatives; the returned sides belong
/// to the worst grid point and direction.
pub fn check_derivative_estimate<T: Real>(
    ws: &SpectralWorkspace<T>,
    d: &DiffusionTable<T>,
    c: &SpeciesField<T>,
    u: &SpeciesVelocityField<T>,
    alpha: &[usize],
    x: &[T],
) -> Result<BoundCheck<T>> {
    let grid = c.grid();
    let dim = grid.dim();
    if alpha.len() != dim {
        return Err(CoreError::DimensionMismatch {
            context: "derivative multi-index",
            expected: dim,
            got: alpha.len(),
        });
    }
    let n = c.n_species();
    let gc = mixture::gap_constants(d);
    let a_order = order(alpha);
    let three_pow = T::from_f64_lossy(3f64.powi(a_order as i32));
    let n_sq = T::from_usize_lossy(n * n);
    let mut x_norm = T::zero();
    for &v in x {
        x_norm += v * v;
    }
    let x_norm = x_norm.sqrt();

    // Derivatives of c for every sub-multi-index.
    let subs = sub_indices(alpha);
    let c_derivs: Vec<SpeciesField<T>> = subs
        .iter()
        .map(|beta| c.map_species(|_, s| ws.partial(s, beta)))
        .collect();

    let mut worst = BoundCheck {
        lhs: T::zero(),
        rhs: T::zero(),
        holds: true,
    };
    let mut worst_margin = T::from_f64_lossy(-f64::MAX);
    let slack = T::from_f64_lossy(1e-8);

    let mut cbuf = vec![T::zero(); n];
    let mut ubuf = vec![T::zero(); n];

    for axis in 0..dim {
        let u_axis = u.axis_components(axis);
        let u_derivs: Vec<SpeciesField<T>> = subs
            .iter()
            .map(|beta| u_axis.map_species(|_, s| ws.partial(s, beta)))
            .collect();
        // A(c)U evaluated pointwise, then differentiated spectrally.
        let mut au = SpeciesField::zeros(grid, n);
        for p in 0..grid.n_points() {
            c.point_into(p, &mut cbuf);
            u_axis.point_into(p, &mut ubuf);
            let a = mixture::build_ms_matrix(&cbuf, d)?;
            let prod = a.apply(&ubuf)?;
            for i in 0..n {
                au.species_mut(i).data_mut()[p] = prod[i];
            }
        }
        let d_au = au.map_species(|_, s| ws.partial(s, alpha));
        // A(c) applied to the alpha-derivative of U, pointwise.
        let du_alpha = subs
            .iter()
            .position(|b| b == alpha)
            .expect("alpha in sub-index set");
        let mut a_du = SpeciesField::zeros(grid, n);
        for p in 0..grid.n_points() {
            c.point_into(p, &mut cbuf);
            u_derivs[du_alpha].point_into(p, &mut ubuf);
            let a = mixture::build_ms_matrix(&cbuf, d)?;
            let prod = a.apply(&ubuf)?;
            for i in 0..n {
                a_du.species_mut(i).data_mut()[p] = prod[i];
            }
        }

        for p in 0..grid.n_points() {
            let mut lhs = T::zero();
            let mut term1 = T::zero();
            for i in 0..n {
                lhs += d_au.species(i).data()[p] * x[i];
                term1 += a_du.species(i).data()[p] * x[i];
            }
            c.point_into(p, &mut cbuf);
            let mut c_total = T::zero();
            for &v in &cbuf {
                c_total += v;
            }

            let mut sum2 = T::zero();
            let mut sum3 = T::zero();
            for (i1, a1) in subs.iter().enumerate() {
                if order(a1) < 1 {
                    continue;
                }
                // Pair split: a3 = alpha - a1.
                let a3: Vec<usize> = alpha.iter().zip(a1).map(|(&a, &b)| a - b).collect();
                let i3 = subs.iter().position(|b| *b == a3).expect("closed set");
                sum2 += pointwise_species_norm(&c_derivs[i1], p)
                    * pointwise_species_norm(&u_derivs[i3], p);
                // Triple split: a2 <= alpha - a1 with |a2| >= 1.
                for (i2, a2) in subs.iter().enumerate() {
                    if order(a2) < 1 {
                        continue;
                    }
                    if a2.iter().zip(&a3).any(|(&b, &r)| b > r) {
                        continue;
                    }
                    let rest: Vec<usize> = a3.iter().zip(a2).map(|(&r, &b)| r - b).collect();
                    let ir = subs.iter().position(|b| *b == rest).expect("closed set");
                    sum3 += pointwise_species_norm(&c_derivs[i1], p)
                        * pointwise_species_norm(&c_derivs[i2], p)
                        * pointwise_species_norm(&u_derivs[ir], p);
                }
            }
            let rhs = term1
                + T::from_f64_lossy(2.0) * three_pow * n_sq * gc.mu_a * c_total * x_norm * sum2
                + three_pow * n_sq * gc.mu_a * x_norm * sum3;
            let margin = lhs - rhs;
            if margin > worst_margin {
                worst_margin = margin;
                worst = BoundCheck {
                    lhs,
                    rhs,
                    holds: lhs <= rhs + slack,
                };
            }
        }
    }
    Ok(worst)
}
