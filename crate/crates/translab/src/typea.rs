//! Exact closed forms special to `SL_d(R)`: fundamental coweights, rank-one
//! face projections, tent-function upper bounds and their sharper variant for
//! positively curved representation classes, the Lebesgue growth form, and
//! symmetric-power representations of `SL_2`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cartan::{fundamental_coweight, CartanVector, GroupElement, LinearForm, ThetaSet};
use crate::error::Error;
use crate::Result;

/// Largest symmetric-power dimension accepted by [`irreducible_rep`].
pub const MAX_REP_DIM: usize = 16;
/// Agreement required between closed-form bounds and brute maximization.
pub const BRUTE_TOL: f64 = 1e-6;

fn check_indices(d: usize, i: usize) -> Result<()> {
    if d < 2 || i < 1 || i > d - 1 {
        return Err(Error::InvalidArgument(format!(
            "root index {i} out of range for dimension {d}"
        )));
    }
    Ok(())
}

/// Fundamental coweight as a sum-zero vector: first `i` entries `(d-i)/d`,
/// remaining entries `-i/d`; satisfies `alpha_j(w_i) = delta_ij`.
pub fn w_vector(d: usize, i: usize) -> Result<CartanVector> {
    check_indices(d, i)?;
    Ok(CartanVector::recentered(
        fundamental_coweight(d, i).iter().copied().collect(),
    ))
}

/// Closed form for the projection onto the single-root face:
/// `d (t_1 + .. + t_i) / (i (d - i)) * w_i`.
pub fn p_alpha_closed_form(d: usize, i: usize, t: &CartanVector) -> Result<CartanVector> {
    check_indices(d, i)?;
    if t.dim() != d {
        return Err(Error::InvalidArgument(format!(
            "vector dimension {} does not match d = {d}",
            t.dim()
        )));
    }
    let partial: f64 = t.entries()[..i].iter().sum();
    let coeff = d as f64 * partial / (i as f64 * (d - i) as f64);
    Ok(w_vector(d, i)?.scale(coeff))
}

/// The tent-function upper bound evaluated at `t`:
/// the sum of `t_i - t_j` over `i < j`, minus half the sum of
/// `t_i - t_{d+1-i}` over `i <= floor(d/2)`. Linear in `t`.
pub fn quint_upper_bound(t: &CartanVector) -> f64 {
    let d = t.dim();
    let mut two_rho = 0.0;
    for (idx, x) in t.entries().iter().enumerate() {
        // Sum over i<j of (t_i - t_j) weights entry i by (d+1-2i), 1-based.
        let i = idx + 1;
        two_rho += (d as f64 + 1.0 - 2.0 * i as f64) * x;
    }
    let mut half_span = 0.0;
    for i in 0..d / 2 {
        half_span += t.entry(i) - t.entry(d - 1 - i);
    }
    two_rho - 0.5 * half_span
}

#[derive(Clone, Copy, Debug)]
struct Fraction {
    num: i128,
    den: i128,
}

impl Fraction {
    fn new(num: i128, den: i128) -> Self {
        debug_assert!(den > 0);
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i128;
        Fraction {
            num: num / g,
            den: den / g,
        }
    }

    fn le(&self, other: &Fraction) -> bool {
        self.num * other.den <= other.num * self.den
    }

    fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    if a == 0 {
        return b.max(1);
    }
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// Maximum of [`quint_upper_bound`] over dominant sum-zero `t` normalized by
/// `d (t_1 + .. + t_i) = i (d - i)`.
///
/// The constraint region is the convex hull of scaled coweights
/// `s_j w_j` with `s_j = i(d-i) / (min(i,j) (d - max(i,j)))`, and the
/// objective is linear, so the maximum is attained at a vertex; vertex values
/// are evaluated in exact integer arithmetic. For `d = 3` the result is
/// exactly `3` for both root indices.
pub fn quint_alpha_bound(d: usize, i: usize) -> Result<f64> {
    check_indices(d, i)?;
    let (di, ii) = (d as i128, i as i128);
    let mut best: Option<Fraction> = None;
    for j in 1..d {
        let ji = j as i128;
        // quint_upper_bound(w_j) = j(d-j) - min(j, d-j)/2, exactly.
        let val_num = 2 * ji * (di - ji) - ji.min(di - ji);
        let scale_den = ii.min(ji) * (di - ii.max(ji));
        let value = Fraction::new(ii * (di - ii) * val_num, 2 * scale_den);
        best = Some(match best {
            None => value,
            Some(b) if b.le(&value) => value,
            Some(b) => b,
        });
    }
    let best = best.ok_or(Error::OptimizerFailure { best: f64::NAN })?;
    let out = best.to_f64();
    if !out.is_finite() {
        return Err(Error::OptimizerFailure { best: out });
    }
    Ok(out)
}

/// Independent maximization of the tent bound over the same region by a
/// lattice sweep of convex combinations of the scaled-coweight vertices.
pub fn quint_grid_maximum(d: usize, i: usize, steps: usize) -> Result<f64> {
    check_indices(d, i)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("grid needs at least one step".into()));
    }
    let mut vertices = Vec::with_capacity(d - 1);
    for j in 1..d {
        let s = (i * (d - i)) as f64 / (i.min(j) * (d - i.max(j))) as f64;
        vertices.push(w_vector(d, j)?.scale(s));
    }
    let k = vertices.len();
    let mut best = f64::NEG_INFINITY;
    let mut weights = vec![0usize; k];
    // Enumerates all lattice points of the weight simplex with denominator
    // `steps` by counting compositions.
    fn sweep(
        idx: usize,
        remaining: usize,
        weights: &mut Vec<usize>,
        vertices: &[CartanVector],
        steps: usize,
        best: &mut f64,
    ) {
        if idx + 1 == weights.len() {
            weights[idx] = remaining;
            let mut t = CartanVector::zero(vertices[0].dim());
            for (w, v) in weights.iter().zip(vertices) {
                if *w > 0 {
                    t = t.add(&v.scale(*w as f64 / steps as f64));
                }
            }
            let val = quint_upper_bound(&t);
            if val > *best {
                *best = val;
            }
            return;
        }
        for w in 0..=remaining {
            weights[idx] = w;
            sweep(idx + 1, remaining - w, weights, vertices, steps, best);
        }
    }
    sweep(0, steps, &mut weights, &vertices, steps, &mut best);
    if !best.is_finite() {
        return Err(Error::OptimizerFailure { best });
    }
    Ok(best)
}

/// Closed-form sharper bound for positively curved classes:
/// `max(i, d-i) / (d - 1)`.
///
/// Construction verifies the closed form against [`hitchin_brute_gap`] and
/// reports a mismatch as an error.
pub fn hitchin_bound(d: usize, i: usize) -> Result<f64> {
    check_indices(d, i)?;
    let closed = i.max(d - i) as f64 / (d - 1) as f64;
    let gap = hitchin_brute_gap(d, i)?;
    if gap > BRUTE_TOL {
        return Err(Error::BoundMismatch {
            closed,
            search: closed + gap,
        });
    }
    Ok(closed)
}

/// Gap between the closed form `max(i, d-i) / (d-1)` and a brute
/// maximization of `(t_1 - t_d) / (d - 1)` over the normalized region.
///
/// The brute search reduces to two variables by setting the middle entries
/// `t_2 = .. = t_i = x` and `t_{i+1} = .. = t_{d-1} = y` (the objective only
/// sees the extremes, and averaging equal middle blocks stays feasible), then
/// sweeps a fine 2-D grid subject to dominance.
pub fn hitchin_brute_gap(d: usize, i: usize) -> Result<f64> {
    check_indices(d, i)?;
    let closed = i.max(d - i) as f64 / (d - 1) as f64;
    let df = d as f64;
    let ifl = i as f64;
    let partial = ifl * (df - ifl) / df;
    let lo = -ifl / df;
    let hi = (df - ifl) / df;
    let steps = 2000usize;
    let mut best = f64::NEG_INFINITY;
    for sx in 0..=steps {
        let x = lo + (hi - lo) * sx as f64 / steps as f64;
        let t1 = partial - (ifl - 1.0) * x;
        if t1 < x - 1e-12 {
            continue;
        }
        for sy in 0..=sx {
            let y = lo + (hi - lo) * sy as f64 / steps as f64;
            let td = -partial - (df - 1.0 - ifl) * y;
            if y < td - 1e-12 || x < y - 1e-12 {
                continue;
            }
            let val = (t1 - td) / (df - 1.0);
            if val > best {
                best = val;
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::OptimizerFailure { best });
    }
    Ok((closed - best).abs())
}

/// The Lebesgue growth form: twice the half-sum of positive roots composed
/// with the face projection, expressed on the dual coweight basis of `theta`.
///
/// Coefficients are `i (d - i)` for `i` in theta, since twice the half-sum
/// evaluates to `i (d - i)` on the coweight `w_i`.
pub fn rho_form(theta: &ThetaSet) -> Result<LinearForm> {
    let d = theta.dim();
    let coeffs = theta
        .indices()
        .iter()
        .map(|&i| (i * (d - i)) as f64)
        .collect();
    LinearForm::new(theta.clone(), coeffs)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut out = 1.0_f64;
    for j in 0..k {
        out = out * (n - j) as f64 / (j + 1) as f64;
    }
    out
}

/// Image of a `2x2` element under the `d`-dimensional symmetric-power
/// representation, expressed in the orthonormal scaled-monomial basis.
///
/// In this basis the representation carries rotations to rotations, so the
/// Cartan projection scales exactly: `mu(tau_d(g)) = mu_1(g) * (d-1, d-3,
/// .., -(d-1))`.
pub fn irreducible_rep(g: &GroupElement, d: usize) -> Result<GroupElement> {
    if g.dim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "symmetric power expects a 2x2 input, got {}x{}",
            g.dim(),
            g.dim()
        )));
    }
    if d < 2 {
        return Err(Error::InvalidArgument(
            "representation dimension must be at least 2".into(),
        ));
    }
    if d > MAX_REP_DIM {
        return Err(Error::UnsupportedDimension {
            op: "irreducible_rep",
            dim: d,
            max: MAX_REP_DIM,
        });
    }
    let n = d - 1;
    let m = g.matrix();
    let (a, b) = (m[(0, 0)], m[(0, 1)]);
    let (c, e) = (m[(1, 0)], m[(1, 1)]);
    // Column k is the expansion of (a x + c y)^(n-k) (b x + e y)^k on the
    // monomial basis x^(n-j) y^j, computed by convolving the two binomial
    // expansions.
    let mut monomial = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        let mut coeffs = vec![0.0_f64; d];
        for p in 0..=(n - k) {
            let first = binomial(n - k, p) * a.powi((n - k - p) as i32) * c.powi(p as i32);
            for q in 0..=k {
                let second = binomial(k, q) * b.powi((k - q) as i32) * e.powi(q as i32);
                coeffs[p + q] += first * second;
            }
        }
        for (j, v) in coeffs.iter().enumerate() {
            monomial[(j, k)] = *v;
        }
    }
    // Conjugate into the orthonormal basis x^(n-k) y^k sqrt(binom(n, k)).
    let mut scaled = monomial;
    for j in 0..d {
        for k in 0..d {
            scaled[(j, k)] *= (binomial(n, k) / binomial(n, j)).sqrt();
        }
    }
    GroupElement::new(scaled)
}

/// Bundle of the exact type-A constants for one root index.
#[derive(Clone, Debug, Serialize)]
pub struct TypeAConstants {
    pub d: usize,
    pub i: usize,
    pub w_i: CartanVector,
    pub quint_bound: f64,
    pub hitchin_bound: f64,
    pub hitchin_brute_gap: f64,
}

impl TypeAConstants {
    pub fn compute(d: usize, i: usize) -> Result<Self> {
        Ok(TypeAConstants {
            d,
            i,
            w_i: w_vector(d, i)?,
            quint_bound: quint_alpha_bound(d, i)?,
            hitchin_bound: hitchin_bound(d, i)?,
            hitchin_brute_gap: hitchin_brute_gap(d, i)?,
        })
    }
}
