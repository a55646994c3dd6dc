//! Beamwidth allocation by water-filling.
//!
//! Minimizes the convex upper bound on the average BS power over the simplex
//! `{omega >= 0, sum omega = pi^2}` of codeword beamwidths. The closed-form
//! solution is `omega_d = (pi^2 / kappa) [lambda - W(d)]^+` with the dual
//! variable `lambda` found by bisection on the piecewise-linear `h(lambda)`.
//! All parameters enter the solution only through the aggregate
//! `kappa = 2 P(W(e) <= eps) M phi_d_bar / phi_s`.
//!
//! The module also evaluates the exact (non-convex) average power, the convex
//! upper bound, and a projected-gradient oracle used to cross-check the
//! closed form.

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::Scalar;

/// Relative tolerance on `h(lambda) = 1` for the bisection.
fn dual_tolerance<F: Scalar>() -> F {
    F::of(1e-12).max(F::epsilon() * F::of(8.0))
}

const MAX_BISECTION_ITERS: u32 = 200;

/// Aggregate parameters of the power-minimization problem.
///
/// `p_success` is the design-time probability `P(W(e) <= eps)` of at most
/// `eps` detection errors; the optimization depends on the physical
/// parameters only through `kappa()`.
#[derive(Debug, Clone, Copy)]
pub struct PowerParams<F> {
    /// Beam-alignment energy density `phi_s` (J/rad^2).
    pub phi_s: F,
    /// Mean data energy density over users (J/rad^2).
    pub phi_d_bar: F,
    /// Number of users `M`.
    pub users: usize,
    /// Frame duration (s).
    pub t_fr: F,
    /// `P(W(e) <= eps)` used when the allocation was designed.
    pub p_success: F,
}

impl<F: Scalar> PowerParams<F> {
    pub fn new(phi_s: F, phi_d_bar: F, users: usize, t_fr: F, p_success: F) -> Result<Self> {
        if !(phi_s > F::zero()) || !phi_s.is_finite() {
            return Err(Error::invalid("phi_s must be positive and finite"));
        }
        if !(phi_d_bar > F::zero()) || !phi_d_bar.is_finite() {
            return Err(Error::invalid("phi_d_bar must be positive and finite"));
        }
        if users == 0 {
            return Err(Error::invalid("user count must be >= 1"));
        }
        if !(t_fr > F::zero()) {
            return Err(Error::invalid("frame duration must be positive"));
        }
        if !(p_success > F::zero() && p_success <= F::one()) {
            return Err(Error::invalid("p_success must lie in (0, 1]"));
        }
        Ok(PowerParams {
            phi_s,
            phi_d_bar,
            users,
            t_fr,
            p_success,
        })
    }

    /// `delta = 1 - P(W(e) <= eps)`, the mis-alignment bound.
    pub fn delta(&self) -> F {
        F::one() - self.p_success
    }

    /// `kappa = 2 P(W(e) <= eps) M phi_d_bar / phi_s`.
    pub fn kappa(&self) -> F {
        F::of(2.0) * self.p_success * F::from_usize(self.users).unwrap() * self.phi_d_bar
            / self.phi_s
    }

    /// Convenience constructor for a target `kappa` (tests and analytic
    /// instances): unit `phi_s`, `M = 1`, `p_success = 1`.
    pub fn from_kappa(kappa: F, t_fr: F) -> Result<Self> {
        PowerParams::new(F::one(), kappa / F::of(2.0), 1, t_fr, F::one())
    }
}

/// Per-codeword beamwidths, indexed in the codebook's canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamwidthAllocation<F> {
    omega: Vec<F>,
}

impl<F: Scalar> BeamwidthAllocation<F> {
    /// Wrap explicit beamwidths; entries must be non-negative and match the
    /// codebook size. The simplex sum is checked where it matters (partition
    /// construction), not here, so evaluation at arbitrary feasible points is
    /// possible.
    pub fn from_omegas(omega: Vec<F>, cb: &Codebook) -> Result<Self> {
        if omega.len() != cb.size() {
            return Err(Error::invalid(format!(
                "allocation has {} entries for a codebook of size {}",
                omega.len(),
                cb.size()
            )));
        }
        if omega.iter().any(|w| !(*w >= F::zero()) || !w.is_finite()) {
            return Err(Error::invalid("beamwidths must be non-negative and finite"));
        }
        Ok(BeamwidthAllocation { omega })
    }

    /// Uniform split `pi^2 / |C|`.
    pub fn uniform(cb: &Codebook) -> Self {
        let w = F::pi_squared() / F::from_usize(cb.size()).unwrap();
        BeamwidthAllocation {
            omega: vec![w; cb.size()],
        }
    }

    pub fn get(&self, index: usize) -> F {
        self.omega[index]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.omega
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn total(&self) -> F {
        self.omega.iter().fold(F::zero(), |a, &b| a + b)
    }

    /// `sum_d W(d) omega_d`, the beam-alignment term of the objective.
    pub fn weighted_total(&self, cb: &Codebook) -> F {
        self.omega
            .iter()
            .enumerate()
            .fold(F::zero(), |acc, (i, &w)| {
                acc + F::from_u32(cb.weight_of(i)).unwrap() * w
            })
    }

    /// CSV export: `codeword,weight,omega_rad2`.
    pub fn to_csv(&self, cb: &Codebook) -> String {
        let mut out = String::from("codeword,weight,omega_rad2\n");
        for (i, &w) in self.omega.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", cb.codeword(i), cb.weight_of(i), w));
        }
        out
    }
}

fn binomial_coefficient<F: Scalar>(n: u32, k: u32) -> F {
    // n <= 20, exact in double precision.
    let mut c = F::one();
    for i in 0..k {
        c = c * F::from_u32(n - i).unwrap() / F::from_u32(i + 1).unwrap();
    }
    c
}

fn check_probability<F: Scalar>(p_e: F) -> Result<()> {
    if !(p_e >= F::zero() && p_e <= F::one()) {
        return Err(Error::invalid("p_e must lie in [0, 1]"));
    }
    Ok(())
}

/// `P(W(e) <= eps) = sum_{l=0}^{eps} C(L,l) p_e^l (1-p_e)^(L-l)`.
pub fn success_probability<F: Scalar>(p_e: F, l: u32, eps: u32) -> Result<F> {
    check_probability(p_e)?;
    if eps > l {
        return Err(Error::invalid("eps must not exceed the block length"));
    }
    let mut sum = F::zero();
    for w in 0..=eps {
        sum += binomial_coefficient::<F>(l, w)
            * p_e.powi(w as i32)
            * (F::one() - p_e).powi((l - w) as i32);
    }
    Ok(sum.min(F::one()))
}

/// Binomial tail `P(W(e) > eps)`, the mis-alignment bound.
pub fn misalignment_tail<F: Scalar>(p_e: F, l: u32, eps: u32) -> Result<F> {
    check_probability(p_e)?;
    if eps > l {
        return Err(Error::invalid("eps must not exceed the block length"));
    }
    let mut sum = F::zero();
    for w in (eps + 1)..=l {
        sum += binomial_coefficient::<F>(l, w)
            * p_e.powi(w as i32)
            * (F::one() - p_e).powi((l - w) as i32);
    }
    Ok(sum)
}

/// `h(lambda) = (1/kappa) sum_w n_w [lambda - w]^+`; non-decreasing,
/// piecewise linear, `h(0) = 0`.
pub fn h_of_lambda<F: Scalar>(lambda: F, params: &PowerParams<F>, cb: &Codebook) -> F {
    let kappa = params.kappa();
    let mut sum = F::zero();
    for (w, &n) in cb.weight_distribution().iter().enumerate() {
        if n == 0 {
            continue;
        }
        let excess = lambda - F::from_usize(w).unwrap();
        if excess > F::zero() {
            sum += F::from_usize(n).unwrap() * excess;
        }
    }
    sum / kappa
}

/// Bisection bounds: `lambda_min = kappa / |C|`, `lambda_max = lambda_min +
/// mean codeword weight`.
pub fn lambda_bounds<F: Scalar>(params: &PowerParams<F>, cb: &Codebook) -> (F, F) {
    let lambda_min = params.kappa() / F::from_usize(cb.size()).unwrap();
    (lambda_min, lambda_min + F::of(cb.mean_weight()))
}

/// Solve `h(lambda) = 1` by bisection over `[lambda_min, lambda_max]`.
pub fn solve_dual<F: Scalar>(params: &PowerParams<F>, cb: &Codebook) -> Result<F> {
    let tol = dual_tolerance::<F>();
    let (mut lo, mut hi) = lambda_bounds(params, cb);
    if (h_of_lambda(lo, params, cb) - F::one()).abs() <= tol {
        return Ok(lo);
    }
    if (h_of_lambda(hi, params, cb) - F::one()).abs() <= tol {
        return Ok(hi);
    }
    let mut mid = (lo + hi) / F::of(2.0);
    for _ in 0..MAX_BISECTION_ITERS {
        mid = (lo + hi) / F::of(2.0);
        let h = h_of_lambda(mid, params, cb);
        if (h - F::one()).abs() <= tol {
            return Ok(mid);
        }
        if h < F::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // h is monotone and continuous; reaching this means the interval shrank
    // to machine precision without meeting the tolerance. Accept the midpoint
    // if it is close, otherwise report failure.
    let h = h_of_lambda(mid, params, cb);
    if (h - F::one()).abs() <= F::of(1e3) * tol {
        Ok(mid)
    } else {
        Err(Error::NumericalFailure(format!(
            "bisection stalled at lambda={mid} with h={h}"
        )))
    }
}

/// Closed-form optimal allocation `omega_d = (pi^2 / kappa) [lambda - W(d)]^+`.
pub fn allocate<F: Scalar>(
    params: &PowerParams<F>,
    cb: &Codebook,
) -> Result<BeamwidthAllocation<F>> {
    let lambda = solve_dual(params, cb)?;
    Ok(allocation_at(lambda, params, cb))
}

/// Allocation induced by an explicit dual variable (mainly for tests).
pub fn allocation_at<F: Scalar>(
    lambda: F,
    params: &PowerParams<F>,
    cb: &Codebook,
) -> BeamwidthAllocation<F> {
    let scale = F::pi_squared() / params.kappa();
    let omega = (0..cb.size())
        .map(|i| {
            let excess = lambda - F::from_u32(cb.weight_of(i)).unwrap();
            if excess > F::zero() {
                scale * excess
            } else {
                F::zero()
            }
        })
        .collect();
    BeamwidthAllocation { omega }
}

fn check_dims<F: Scalar>(omega: &BeamwidthAllocation<F>, cb: &Codebook) -> Result<()> {
    if omega.len() != cb.size() {
        return Err(Error::invalid(format!(
            "allocation size {} does not match codebook size {}",
            omega.len(),
            cb.size()
        )));
    }
    Ok(())
}

/// Exact average power: alignment term plus the full expectation of the data
/// term over error sequences, enumerating every `e` in `{0,1}^L`.
pub fn avg_power_exact<F: Scalar>(
    omega: &BeamwidthAllocation<F>,
    cb: &Codebook,
    params: &PowerParams<F>,
    p_e: F,
) -> Result<F> {
    check_dims(omega, cb)?;
    check_probability(p_e)?;
    let l = cb.len_slots();
    let eps = cb.epsilon();
    let p_le = success_probability(p_e, l, eps)?;
    let table = cb.decode_table();

    // p(e) depends on e only through its weight.
    let pmf_by_weight: Vec<F> = (0..=l)
        .map(|w| p_e.powi(w as i32) * (F::one() - p_e).powi((l - w) as i32))
        .collect();

    let pi2 = F::pi_squared();
    let m_phi = F::from_usize(params.users).unwrap() * params.phi_d_bar;
    let align_term = params.phi_s * omega.weighted_total(cb);

    let mut data_term = F::zero();
    for (i, &omega_c) in omega.as_slice().iter().enumerate() {
        if omega_c == F::zero() {
            continue;
        }
        let c = cb.codeword(i).word();
        let mut cross = F::zero();
        for e in 0..(1u32 << l) {
            if e.count_ones() <= eps {
                continue;
            }
            let decoded = table[(c ^ e) as usize] as usize;
            cross += omega.get(decoded) * pmf_by_weight[e.count_ones() as usize];
        }
        data_term += omega_c * omega_c * p_le + omega_c * cross;
    }
    Ok((align_term + m_phi / pi2 * data_term) / params.t_fr)
}

fn upper_objective_with<F: Scalar>(
    omega: &BeamwidthAllocation<F>,
    cb: &Codebook,
    params: &PowerParams<F>,
    p_success: F,
) -> F {
    let pi2 = F::pi_squared();
    let m_phi = F::from_usize(params.users).unwrap() * params.phi_d_bar;
    let align_term = params.phi_s * omega.weighted_total(cb);
    let mut data_term = F::zero();
    for &w in omega.as_slice() {
        data_term += p_success * (w * w - pi2 * w) + pi2 * w;
    }
    (align_term + m_phi / pi2 * data_term) / params.t_fr
}

/// Convex upper bound on the average power, with `P(W(e) <= eps)` computed
/// from `p_e` (so the exact/upper gap bound holds by construction).
pub fn avg_power_upper<F: Scalar>(
    omega: &BeamwidthAllocation<F>,
    cb: &Codebook,
    params: &PowerParams<F>,
    p_e: F,
) -> Result<F> {
    check_dims(omega, cb)?;
    let p_le = success_probability(p_e, cb.len_slots(), cb.epsilon())?;
    Ok(upper_objective_with(omega, cb, params, p_le))
}

/// The objective actually minimized by `allocate` and `qp_oracle`:
/// the convex upper bound evaluated with the design `params.p_success`.
pub fn upper_objective<F: Scalar>(
    omega: &BeamwidthAllocation<F>,
    cb: &Codebook,
    params: &PowerParams<F>,
) -> Result<F> {
    check_dims(omega, cb)?;
    Ok(upper_objective_with(omega, cb, params, params.p_success))
}

/// Bound on the exact/upper gap: `M phi_d_bar pi^2 delta / T_fr`.
pub fn gap_bound<F: Scalar>(params: &PowerParams<F>, delta: F) -> F {
    F::from_usize(params.users).unwrap() * params.phi_d_bar * F::pi_squared() * delta / params.t_fr
}

/// Euclidean projection onto `{x >= 0, sum x = total}` (sort-based).
fn project_simplex<F: Scalar>(y: &[F], total: F) -> Vec<F> {
    let mut sorted: Vec<F> = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut cumsum = F::zero();
    let mut theta = F::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - total) / F::from_usize(j + 1).unwrap();
        if u - candidate > F::zero() {
            theta = candidate;
        }
    }
    y.iter().map(|&v| (v - theta).max(F::zero())).collect()
}

/// Independent numerical solver for the beamwidth problem: projected
/// gradient descent on the convex upper bound over the scaled simplex.
///
/// Exists to cross-check the closed-form water-filling; do not replace one
/// with the other.
pub fn qp_oracle<F: Scalar>(
    params: &PowerParams<F>,
    cb: &Codebook,
) -> Result<BeamwidthAllocation<F>> {
    if cb.size() > 1 << 16 {
        return Err(Error::CapacityRefused(
            "qp_oracle limited to |C| <= 2^16".into(),
        ));
    }
    let pi2 = F::pi_squared();
    let m_phi = F::from_usize(params.users).unwrap() * params.phi_d_bar;
    // T_fr * objective = sum_c [a_c w_c + b w_c^2] + const, with
    // a_c = phi_s W(c) + M phi_d_bar (1 - P), b = M phi_d_bar P / pi^2.
    let b = m_phi * params.p_success / pi2;
    let a: Vec<F> = (0..cb.size())
        .map(|i| {
            params.phi_s * F::from_u32(cb.weight_of(i)).unwrap()
                + m_phi * (F::one() - params.p_success)
        })
        .collect();

    let step = F::one() / (F::of(4.0) * b);
    let tol = F::epsilon() * pi2 * F::of(8.0);
    let mut x = vec![pi2 / F::from_usize(cb.size()).unwrap(); cb.size()];
    let mut converged = false;
    for _ in 0..20_000 {
        let y: Vec<F> = x
            .iter()
            .zip(&a)
            .map(|(&xi, &ai)| xi - step * (ai + F::of(2.0) * b * xi))
            .collect();
        let next = project_simplex(&y, pi2);
        let delta = next
            .iter()
            .zip(&x)
            .fold(F::zero(), |acc, (&n, &o)| acc.max((n - o).abs()));
        x = next;
        if delta <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(
            "projected gradient did not converge on the simplex".into(),
        ));
    }
    Ok(BeamwidthAllocation { omega: x })
}
