//! Cartan projections, root-space bookkeeping, Iwasawa cocycles, Busemann
//! functions, and the symmetric-space distance for `SL_d(R)`.
//!
//! Conventions. The model vector space is the set of sum-zero vectors in
//! `R^d`, ordered so that the closed dominant cone consists of non-increasing
//! entries. Simple roots are `alpha_i(t) = t_i - t_{i+1}` for `i = 1..d-1`.
//! All norms are Euclidean on this coordinate system; a Killing-form
//! normalization would rescale every reported length by a constant factor
//! depending only on `d`, and is deliberately not applied.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::Error;
use crate::flags::PartialFlag;
use crate::Result;

/// Tolerance for the sum-zero invariant on constructed vectors.
pub const SUM_ZERO_TOL: f64 = 1e-10;
/// Largest allowed deviation from zero sum on raw input vectors.
pub const SUM_ZERO_INPUT_TOL: f64 = 1e-6;
/// Tolerance for the unit-determinant invariant after renormalization.
pub const DET_TOL: f64 = 1e-8;
/// Slack used by the dominance predicate.
pub const DOMINANT_SLACK: f64 = 1e-9;
/// Orthogonality tolerance for flag frames.
pub const FRAME_ORTHO_TOL: f64 = 1e-9;

/// A sum-zero vector of singular-value logarithms.
///
/// Entries sum to zero within [`SUM_ZERO_TOL`]; construction recenters the
/// input after validating it. Entries are stored in the order given, so a
/// Cartan projection is dominant while a Busemann increment need not be.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CartanVector {
    entries: Vec<f64>,
}

impl CartanVector {
    /// Builds a vector from entries that must already sum to zero within
    /// [`SUM_ZERO_INPUT_TOL`]; the stored entries are recentered exactly.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "Cartan vector needs dimension >= 2, got {}",
                entries.len()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "Cartan vector entries must be finite".into(),
            ));
        }
        let sum: f64 = entries.iter().sum();
        let scale = entries.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if sum.abs() > SUM_ZERO_INPUT_TOL * scale {
            return Err(Error::NotSumZero { sum });
        }
        Ok(Self::recentered(entries))
    }

    /// Recenters without validating; used internally where the sum-zero
    /// property holds by construction up to rounding.
    pub(crate) fn recentered(mut entries: Vec<f64>) -> Self {
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        for x in entries.iter_mut() {
            *x -= mean;
        }
        CartanVector { entries }
    }

    /// The zero vector in dimension `d`.
    pub fn zero(d: usize) -> Self {
        CartanVector {
            entries: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> f64 {
        self.entries[i]
    }

    /// Membership in the closed dominant cone (non-increasing entries),
    /// with slack [`DOMINANT_SLACK`] scaled by the largest entry.
    pub fn dominant(&self) -> bool {
        let scale = self
            .entries
            .iter()
            .fold(1.0_f64, |m, x| m.max(x.abs()));
        self.entries
            .windows(2)
            .all(|w| w[0] >= w[1] - DOMINANT_SLACK * scale)
    }

    /// Simple root `alpha_i(t) = t_i - t_{i+1}` for `i` in `1..=d-1`.
    pub fn simple_root(&self, i: usize) -> f64 {
        assert!(i >= 1 && i < self.dim(), "root index out of range");
        self.entries[i - 1] - self.entries[i]
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CartanVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn add(&self, other: &CartanVector) -> CartanVector {
        debug_assert_eq!(self.dim(), other.dim());
        CartanVector::recentered(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    pub fn sub(&self, other: &CartanVector) -> CartanVector {
        debug_assert_eq!(self.dim(), other.dim());
        CartanVector::recentered(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn scale(&self, c: f64) -> CartanVector {
        CartanVector::recentered(self.entries.iter().map(|x| c * x).collect())
    }

    /// Distance to another vector in the Euclidean norm.
    pub fn distance(&self, other: &CartanVector) -> f64 {
        self.sub(other).norm()
    }

    /// Unit vector in the same direction, or None for the zero vector.
    pub fn normalized(&self) -> Option<CartanVector> {
        let n = self.norm();
        if n < 1e-300 {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }

    pub(crate) fn as_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.entries)
    }
}

/// Entry reversal composed with sign flip: `(t_1,..,t_d) -> (-t_d,..,-t_1)`.
///
/// This is the opposition involution; it equals `-Ad(w0)` for the
/// antidiagonal Weyl representative [`w0_matrix`] and preserves the dominant
/// cone.
pub fn opposition_involution(v: &CartanVector) -> CartanVector {
    let mut e: Vec<f64> = v.entries().iter().map(|x| -x).collect();
    e.reverse();
    CartanVector::recentered(e)
}

/// A sorted, non-empty set of simple-root indices in `1..=d-1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ThetaSet {
    d: usize,
    indices: Vec<usize>,
}

impl ThetaSet {
    pub fn new(d: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidTheta(format!("dimension {d} too small")));
        }
        let mut idx: Vec<usize> = indices.into_iter().collect();
        idx.sort_unstable();
        idx.dedup();
        if idx.is_empty() {
            return Err(Error::InvalidTheta("empty index set".into()));
        }
        if idx[0] < 1 || *idx.last().unwrap() > d - 1 {
            return Err(Error::InvalidTheta(format!(
                "indices {idx:?} out of range 1..={}",
                d - 1
            )));
        }
        Ok(ThetaSet { d, indices: idx })
    }

    /// The full set `{1, .., d-1}`.
    pub fn full(d: usize) -> Self {
        ThetaSet {
            d,
            indices: (1..d).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.d - 1
    }

    /// Number of indices; equals the dimension of the associated face.
    pub fn face_dim(&self) -> usize {
        self.indices.len()
    }

    /// The image of the set under the opposition involution:
    /// `{ d - i : i in theta }`.
    pub fn iota(&self) -> ThetaSet {
        let mut idx: Vec<usize> = self.indices.iter().map(|i| self.d - i).collect();
        idx.sort_unstable();
        ThetaSet {
            d: self.d,
            indices: idx,
        }
    }

    /// Subspace dimensions `d_j` of the flags attached to this set.
    pub fn subspace_dims(&self) -> &[usize] {
        &self.indices
    }
}

/// Fundamental coweight `w_i`: first `i` entries `(d-i)/d`, rest `-i/d`.
///
/// These vectors span the face associated with a root-index set and satisfy
/// `alpha_i(w_j) = delta_ij`.
pub fn fundamental_coweight(d: usize, i: usize) -> DVector<f64> {
    assert!(i >= 1 && i < d, "coweight index out of range");
    let df = d as f64;
    let ifl = i as f64;
    DVector::from_fn(d, |r, _| {
        if r < i {
            (df - ifl) / df
        } else {
            -ifl / df
        }
    })
}

/// Orthogonal projection of `v` onto the face spanned by the fundamental
/// coweights `{w_i : i in theta}`.
///
/// Computed by solving the Gram system of the coweight basis; the projection
/// is idempotent and self-adjoint. Note that `alpha_i(p_theta(v))` generally
/// differs from `alpha_i(v)` even for `i` in theta.
pub fn p_theta(v: &CartanVector, theta: &ThetaSet) -> Result<CartanVector> {
    let d = v.dim();
    if theta.dim() != d {
        return Err(Error::InvalidTheta(format!(
            "theta is for dimension {}, vector has dimension {d}",
            theta.dim()
        )));
    }
    if theta.is_full() {
        return Ok(v.clone());
    }
    let k = theta.face_dim();
    let mut w = DMatrix::<f64>::zeros(d, k);
    for (c, &i) in theta.indices().iter().enumerate() {
        w.set_column(c, &fundamental_coweight(d, i));
    }
    let gram = w.transpose() * &w;
    let rhs = w.transpose() * v.as_dvector();
    let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| {
        Error::InvalidTheta("coweight Gram matrix is not positive definite".into())
    })?;
    let x = chol.solve(&rhs);
    let p = w * x;
    Ok(CartanVector::recentered(p.iter().copied().collect()))
}

/// A linear form on the face attached to `theta`, stored by coefficients on
/// the dual basis of the fundamental coweights.
///
/// Evaluation factors through [`p_theta`]: with expansion
/// `p_theta(v) = sum x_i w_i`, the value is `sum c_i x_i`. In particular
/// `psi(p_theta(v)) = psi(v)` holds for every `v`. For the full index set the
/// evaluation reduces to `sum c_i alpha_i(v)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearForm {
    theta: ThetaSet,
    coefficients: Vec<f64>,
}

impl LinearForm {
    pub fn new(theta: ThetaSet, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != theta.face_dim() {
            return Err(Error::InvalidArgument(format!(
                "form needs {} coefficients for theta {:?}, got {}",
                theta.face_dim(),
                theta.indices(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "form coefficients must be finite".into(),
            ));
        }
        Ok(LinearForm {
            theta,
            coefficients,
        })
    }

    pub fn theta(&self) -> &ThetaSet {
        &self.theta
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Evaluates the form; `v` may live anywhere in the sum-zero space.
    pub fn evaluate(&self, v: &CartanVector) -> Result<f64> {
        let p = p_theta(v, &self.theta)?;
        // Expansion coefficients on the coweight basis are the simple-root
        // values of the projection, by alpha_i(w_j) = delta_ij.
        let mut acc = 0.0;
        for (c, &i) in self.coefficients.iter().zip(self.theta.indices()) {
            acc += c * p.simple_root(i);
        }
        Ok(acc)
    }

    /// Scales every coefficient.
    pub fn scale(&self, c: f64) -> LinearForm {
        LinearForm {
            theta: self.theta.clone(),
            coefficients: self.coefficients.iter().map(|x| c * x).collect(),
        }
    }

    /// The sum-zero vector representing the form against the Euclidean inner
    /// product: `psi(v) = <rep, v>` for all `v`.
    pub fn representing_vector(&self) -> CartanVector {
        let d = self.theta.dim();
        let mut raw = vec![0.0_f64; d];
        for (c, &i) in self.coefficients.iter().zip(self.theta.indices()) {
            // alpha_i has Euclidean representative e_i - e_{i+1}.
            raw[i - 1] += c;
            raw[i] -= c;
        }
        let v = CartanVector::recentered(raw);
        p_theta(&v, &self.theta).expect("projection of representative")
    }

    /// Euclidean dual norm of the form.
    pub fn norm(&self) -> f64 {
        self.representing_vector().norm()
    }
}

/// An element of `SL_d(R)` with an optional generator word.
///
/// Construction renormalizes by the d-th root of the determinant so that the
/// stored matrix has determinant one within [`DET_TOL`]; inputs with
/// non-positive or non-finite determinant are rejected. The word, when
/// present, lists generator indices from `1`, negated for inverses.
#[derive(Clone, Debug)]
pub struct GroupElement {
    matrix: DMatrix<f64>,
    word: Option<Vec<i32>>,
}

impl GroupElement {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_word(matrix, None)
    }

    pub fn with_word(matrix: DMatrix<f64>, word: Option<Vec<i32>>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() < 2 {
            return Err(Error::InvalidMatrix(format!(
                "expected square matrix of size >= 2, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        let det = matrix.determinant();
        if !det.is_finite() || det <= 0.0 {
            return Err(Error::NotUnimodular { det });
        }
        let d = matrix.nrows();
        let scale = det.powf(-1.0 / d as f64);
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::NotUnimodular { det });
        }
        let renormalized = matrix * scale;
        Ok(GroupElement {
            matrix: renormalized,
            word,
        })
    }

    pub fn identity(d: usize) -> Self {
        GroupElement {
            matrix: DMatrix::identity(d, d),
            word: Some(Vec::new()),
        }
    }

    pub fn from_rows(d: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != d * d {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {d}x{d} matrix, got {}",
                d * d,
                rows.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(d, d, rows))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn word(&self) -> Option<&[i32]> {
        self.word.as_deref()
    }

    pub fn set_word(&mut self, word: Option<Vec<i32>>) {
        self.word = word;
    }

    /// Product with determinant renormalization; words concatenate and
    /// freely reduce when both factors carry one.
    /// Product of two elements. The factors are unimodular by construction,
    /// so the product is not re-validated: a determinant estimate of an
    /// ill-conditioned product carries relative error of order condition
    /// times machine epsilon and renormalizing by it would corrupt the
    /// matrix.
    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        let word = match (&self.word, &other.word) {
            (Some(a), Some(b)) => {
                let mut w = a.clone();
                for &l in b {
                    if w.last() == Some(&-l) {
                        w.pop();
                    } else {
                        w.push(l);
                    }
                }
                Some(w)
            }
            _ => None,
        };
        let matrix = &self.matrix * &other.matrix;
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularOverflow(
                "product overflowed the floating range".into(),
            ));
        }
        Ok(GroupElement { matrix, word })
    }

    /// Matrix inverse. Accurate for moderately conditioned elements; the
    /// inverse of a long product is better formed as the reversed product of
    /// letter inverses.
    pub fn inverse(&self) -> Result<GroupElement> {
        let inv = self
            .matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidMatrix("matrix is numerically singular".into()))?;
        if inv.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularOverflow(
                "inverse overflowed the floating range".into(),
            ));
        }
        let word = self
            .word
            .as_ref()
            .map(|w| w.iter().rev().map(|l| -l).collect());
        Ok(GroupElement { matrix: inv, word })
    }
}

fn svd_sorted(
    m: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let d = m.nrows();
    let svd = m.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::InvalidMatrix("SVD failed".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::InvalidMatrix("SVD failed".into()))?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| sigma[i]).collect();
    let mut us = DMatrix::<f64>::zeros(d, d);
    let mut vs = DMatrix::<f64>::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        us.set_column(c, &u.column(i));
        vs.set_column(c, &v_t.row(i).transpose());
    }
    Ok((sorted, us, vs))
}

/// Logarithms of singular values in non-increasing order.
///
/// The result is dominant and sums to zero. Inputs whose singular values
/// overflow, underflow, or vanish are rejected.
pub fn cartan_projection(g: &GroupElement) -> Result<CartanVector> {
    let (mu, _, _) = cartan_with_frames(g)?;
    Ok(mu)
}

/// Cartan projection together with the orthogonal factors: `g = U S V^T`
/// with singular values non-increasing.
///
/// Columns of `U` and `V` have canonical sign (largest-magnitude entry
/// positive, compensated pairwise so the product is preserved).
pub fn cartan_with_frames(
    g: &GroupElement,
) -> Result<(CartanVector, DMatrix<f64>, DMatrix<f64>)> {
    let (sigma, mut u, mut v) = svd_sorted(g.matrix())?;
    for (i, &s) in sigma.iter().enumerate() {
        if !s.is_finite() || s <= 1e-300 || s >= 1e300 {
            return Err(Error::SingularOverflow(format!(
                "singular value {i} = {s:.3e}"
            )));
        }
    }
    for c in 0..u.ncols() {
        let col = u.column(c);
        let (mut best, mut best_abs) = (0usize, 0.0f64);
        for (r, &x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = r;
            }
        }
        if u[(best, c)] < 0.0 {
            for r in 0..u.nrows() {
                u[(r, c)] = -u[(r, c)];
                v[(r, c)] = -v[(r, c)];
            }
        }
    }
    let logs: Vec<f64> = sigma.iter().map(|s| s.ln()).collect();
    Ok((CartanVector::recentered(logs), u, v))
}

/// Euclidean-norm symmetric-space distance between the orbit points of `g`
/// and `h`: the norm of the Cartan projection of `g^{-1} h`.
pub fn symmetric_distance(g: &GroupElement, h: &GroupElement) -> Result<f64> {
    let rel = g.inverse()?.mul(h)?;
    Ok(cartan_projection(&rel)?.norm())
}

/// The antidiagonal Weyl representative with alternating signs; orthogonal
/// with determinant one, conjugating diagonal matrices to their reversal.
pub fn w0_matrix(d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |r, c| {
        if c == d - 1 - r {
            if r % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    })
}

/// Iwasawa cocycle against a full flag given by an orthogonal frame.
///
/// Returns the logarithms of the positive diagonal of the upper-triangular
/// factor in the orthogonal-times-upper-triangular factorization of
/// `g * frame`, recentered to sum zero. For an orthogonal `g` the cocycle
/// vanishes; for dominant diagonal `a` against the standard frame it equals
/// `log a`.
pub fn iwasawa_sigma(g: &GroupElement, frame: &DMatrix<f64>) -> Result<CartanVector> {
    let d = g.dim();
    if frame.nrows() != d || frame.ncols() != d {
        return Err(Error::DegenerateFrame { deviation: f64::INFINITY });
    }
    let gram_dev = (frame.transpose() * frame - DMatrix::<f64>::identity(d, d))
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()));
    if gram_dev > FRAME_ORTHO_TOL {
        return Err(Error::DegenerateFrame { deviation: gram_dev });
    }
    let m = g.matrix() * frame;
    let qr = m.qr();
    let r = qr.r();
    let mut logs = Vec::with_capacity(d);
    for i in 0..d {
        let rii = r[(i, i)].abs();
        if !rii.is_finite() || rii <= 1e-300 || rii >= 1e300 {
            return Err(Error::SingularOverflow(format!(
                "triangular diagonal {i} = {rii:.3e}"
            )));
        }
        logs.push(rii.ln());
    }
    Ok(CartanVector::recentered(logs))
}

/// Partial-flag Busemann cocycle `p_theta(sigma(g^{-1}, F) - sigma(h^{-1}, F))`
/// computed against the orthonormal completion carried by the flag.
///
/// The value does not depend on the choice of completion: any block-diagonal
/// orthogonal change of the frame that fixes the flag leaves the projection
/// unchanged. Additivity in `(g, h)` holds exactly by construction.
pub fn busemann_theta(
    xi: &PartialFlag,
    g: &GroupElement,
    h: &GroupElement,
) -> Result<CartanVector> {
    if g.dim() != xi.theta().dim() || h.dim() != xi.theta().dim() {
        return Err(Error::InvalidArgument(
            "dimension mismatch between flag and group elements".into(),
        ));
    }
    let frame = xi.frame();
    let sg = iwasawa_sigma(&g.inverse()?, frame)?;
    let sh = iwasawa_sigma(&h.inverse()?, frame)?;
    p_theta(&sg.sub(&sh), xi.theta())
}

/// Supremum of the Cartan displacement `|mu(q1 g q2) - mu(g)|` over the
/// sampled conjugating pairs; finite for bounded sets of perturbations.
pub fn compact_defect(
    pairs: &[(GroupElement, GroupElement)],
    elements: &[GroupElement],
) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for g in elements {
        let mu = cartan_projection(g)?;
        for (q1, q2) in pairs {
            let moved = q1.mul(g)?.mul(q2)?;
            sup = sup.max(cartan_projection(&moved)?.distance(&mu));
        }
    }
    Ok(sup)
}

/// Random element with standard Gaussian entries renormalized into `SL_d`.
pub fn random_sl<R: Rng>(d: usize, rng: &mut R) -> GroupElement {
    loop {
        let mut m = DMatrix::<f64>::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                m[(r, c)] = StandardNormal.sample(rng);
            }
        }
        let det = m.determinant();
        if !det.is_finite() || det.abs() < 1e-6 {
            continue;
        }
        if det < 0.0 {
            for r in 0..d {
                m[(r, 0)] = -m[(r, 0)];
            }
        }
        if let Ok(g) = GroupElement::new(m) {
            return g;
        }
    }
}

/// Haar-like random rotation: orthogonal with determinant one, obtained from
/// the sign-fixed QR factorization of a Gaussian matrix.
pub fn random_rotation<R: Rng>(d: usize, rng: &mut R) -> GroupElement {
    loop {
        let mut m = DMatrix::<f64>::zeros(d, d);
        for r in 0..d {
            for c in 0..d {
                m[(r, c)] = StandardNormal.sample(rng);
            }
        }
        let qr = m.qr();
        let mut q = qr.q();
        let r = qr.r();
        for i in 0..d {
            if r[(i, i)] < 0.0 {
                for row in 0..d {
                    q[(row, i)] = -q[(row, i)];
                }
            }
        }
        if q.determinant() < 0.0 {
            for row in 0..d {
                q[(row, 0)] = -q[(row, 0)];
            }
        }
        if let Ok(g) = GroupElement::new(q) {
            return g;
        }
    }
}

/// Random sum-zero vector with Gaussian entries.
pub fn random_sum_zero<R: Rng>(d: usize, rng: &mut R) -> CartanVector {
    let raw: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    CartanVector::recentered(raw)
}

/// Random element of the block-diagonal subgroup attached to `theta`:
/// independent Gaussian blocks at the cuts `d_j`, jointly renormalized to
/// determinant one. Resamples until moderately conditioned.
pub fn random_levi<R: Rng>(theta: &ThetaSet, rng: &mut R) -> GroupElement {
    let d = theta.dim();
    let mut cuts = vec![0usize];
    cuts.extend_from_slice(theta.indices());
    cuts.push(d);
    loop {
        let mut m = DMatrix::<f64>::zeros(d, d);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            for r in lo..hi {
                for c in lo..hi {
                    m[(r, c)] = StandardNormal.sample(rng);
                }
            }
        }
        let det = m.determinant();
        if !det.is_finite() || det.abs() < 1e-6 {
            continue;
        }
        if det < 0.0 {
            for r in 0..d {
                m[(r, 0)] = -m[(r, 0)];
            }
        }
        let Ok(g) = GroupElement::new(m) else { continue };
        let Ok(mu) = cartan_projection(&g) else { continue };
        if mu.entry(0) - mu.entry(d - 1) < (1e4_f64).ln() {
            return g;
        }
    }
}
