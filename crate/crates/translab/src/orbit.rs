//! Orbit-ball enumeration for finitely generated subgroups: reduced words up
//! to a length cutoff, matrix deduplication, Cartan data per element, and
//! growth-regularity diagnostics.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Deserialize;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::cartan::{p_theta, CartanVector, GroupElement, ThetaSet};
use crate::error::Error;
use crate::Result;

/// Relative quantization scale for matrix deduplication.
pub const DEDUP_SCALE: f64 = 1e-8;
/// Default enumeration budget in elements.
pub const DEFAULT_BUDGET: usize = 2_000_000;
/// Minimum ball depth for regularity fits.
pub const MIN_REGULARITY_LENGTH: usize = 4;

/// A finite generating set with inverses adjoined.
///
/// Letters are addressed by signed indices: `l > 0` is the l-th generator,
/// `l < 0` its inverse. The identity is rejected as a generator.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    d: usize,
    gens: Vec<GroupElement>,
    invs: Vec<GroupElement>,
    labels: Vec<String>,
}

impl GeneratorSet {
    pub fn new(gens: Vec<GroupElement>, labels: Option<Vec<String>>) -> Result<Self> {
        if gens.is_empty() {
            return Err(Error::InvalidGenerators("no generators given".into()));
        }
        let d = gens[0].dim();
        let labels = match labels {
            Some(l) => {
                if l.len() != gens.len() {
                    return Err(Error::InvalidGenerators(format!(
                        "{} labels for {} generators",
                        l.len(),
                        gens.len()
                    )));
                }
                l
            }
            None => (1..=gens.len()).map(|i| format!("g{i}")).collect(),
        };
        let mut tagged = Vec::with_capacity(gens.len());
        let mut invs = Vec::with_capacity(gens.len());
        for (i, g) in gens.into_iter().enumerate() {
            if g.dim() != d {
                return Err(Error::InvalidGenerators(format!(
                    "generator {} has dimension {}, expected {d}",
                    labels[i],
                    g.dim()
                )));
            }
            let dev = (g.matrix() - nalgebra::DMatrix::<f64>::identity(d, d))
                .iter()
                .fold(0.0_f64, |m, x| m.max(x.abs()));
            if dev < 1e-8 {
                return Err(Error::InvalidGenerators(format!(
                    "generator {} equals the identity",
                    labels[i]
                )));
            }
            let mut g = g;
            g.set_word(Some(vec![i as i32 + 1]));
            invs.push(g.inverse()?);
            tagged.push(g);
        }
        Ok(GeneratorSet {
            d,
            gens: tagged,
            invs,
            labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of free generators (inverses not counted).
    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The element for a signed letter index.
    pub fn letter(&self, l: i32) -> Result<&GroupElement> {
        let idx = l.unsigned_abs() as usize;
        if l == 0 || idx > self.gens.len() {
            return Err(Error::InvalidArgument(format!("letter {l} out of range")));
        }
        Ok(if l > 0 {
            &self.gens[idx - 1]
        } else {
            &self.invs[idx - 1]
        })
    }

    pub fn letter_label(&self, l: i32) -> String {
        let idx = l.unsigned_abs() as usize;
        let base = self
            .labels
            .get(idx.saturating_sub(1))
            .map(String::as_str)
            .unwrap_or("?");
        if l < 0 {
            format!("{base}^-1")
        } else {
            base.to_string()
        }
    }

    /// All letters in the deterministic enumeration order
    /// `1, -1, 2, -2, ..`.
    pub fn letters(&self) -> Vec<i32> {
        let mut out = Vec::with_capacity(2 * self.gens.len());
        for i in 1..=self.gens.len() as i32 {
            out.push(i);
            out.push(-i);
        }
        out
    }

    /// Multiplies out a reduced or unreduced word.
    pub fn word_to_element(&self, word: &[i32]) -> Result<GroupElement> {
        let mut acc = GroupElement::identity(self.d);
        for &l in word {
            acc = acc.mul(self.letter(l)?)?;
        }
        Ok(acc)
    }

    /// Renders a word through the generator labels.
    pub fn word_label(&self, word: &[i32]) -> String {
        if word.is_empty() {
            return "e".to_string();
        }
        word.iter()
            .map(|&l| self.letter_label(l))
            .collect::<Vec<_>>()
            .join("·")
    }

    /// Generator set of the subgroup generated by the given words, labeled
    /// by their rendered forms. Enumeration over the result treats the words
    /// as free letters, so counts are upper bounds when the words satisfy
    /// relations.
    pub fn subgroup(&self, words: &[Vec<i32>]) -> Result<GeneratorSet> {
        if words.is_empty() {
            return Err(Error::InvalidGenerators(
                "subgroup needs at least one word".into(),
            ));
        }
        let gens = words
            .iter()
            .map(|w| self.word_to_element(w))
            .collect::<Result<Vec<_>>>()?;
        let labels = words.iter().map(|w| self.word_label(w)).collect();
        GeneratorSet::new(gens, Some(labels))
    }
}

/// One enumerated orbit element.
#[derive(Clone, Debug)]
pub struct OrbitElement {
    pub word: Vec<i32>,
    pub element: GroupElement,
    pub mu: CartanVector,
}

impl OrbitElement {
    pub fn length(&self) -> usize {
        self.word.len()
    }
}

/// All deduplicated orbit elements of word length at most `max_length`,
/// ordered by length and then lexicographically by letter rank.
///
/// Projections of the Cartan data onto a face are cached per root-index set.
#[derive(Debug)]
pub struct OrbitBall {
    gens: GeneratorSet,
    max_length: usize,
    elements: Vec<OrbitElement>,
    level_offsets: Vec<usize>,
    word_index: HashMap<Vec<i32>, usize>,
    theta_cache: Mutex<HashMap<Vec<usize>, Arc<Vec<CartanVector>>>>,
}

impl OrbitBall {
    fn assemble(
        gens: GeneratorSet,
        max_length: usize,
        elements: Vec<OrbitElement>,
        level_offsets: Vec<usize>,
    ) -> Self {
        let word_index = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.word.clone(), i))
            .collect();
        OrbitBall {
            gens,
            max_length,
            elements,
            level_offsets,
            word_index,
            theta_cache: Mutex::new(HashMap::new()),
        }
    }

    /// The generating set the ball was enumerated from.
    pub fn generators(&self) -> &GeneratorSet {
        &self.gens
    }

    /// Inverse of an element, formed as the reversed product of letter
    /// inverses. Stays accurate at depths where inverting the stored product
    /// matrix would lose the small singular directions.
    pub fn element_inverse(&self, index: usize) -> Result<GroupElement> {
        let el = self.elements.get(index).ok_or_else(|| {
            Error::InvalidArgument(format!("element index {index} out of range"))
        })?;
        let inv_word: Vec<i32> = el.word.iter().rev().map(|l| -l).collect();
        self.gens.word_to_element(&inv_word)
    }

    pub fn dim(&self) -> usize {
        self.gens.dim()
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[OrbitElement] {
        &self.elements
    }

    /// Elements of exactly the given word length.
    pub fn level(&self, length: usize) -> &[OrbitElement] {
        if length > self.max_length {
            return &[];
        }
        &self.elements[self.level_offsets[length]..self.level_offsets[length + 1]]
    }

    /// Index range of a level inside `elements()`.
    pub fn level_range(&self, length: usize) -> std::ops::Range<usize> {
        if length > self.max_length {
            return 0..0;
        }
        self.level_offsets[length]..self.level_offsets[length + 1]
    }

    pub fn find(&self, word: &[i32]) -> Option<usize> {
        self.word_index.get(word).copied()
    }

    /// Face projections of all Cartan vectors, cached per index set.
    pub fn mu_theta(&self, theta: &ThetaSet) -> Result<Arc<Vec<CartanVector>>> {
        if theta.dim() != self.dim() {
            return Err(Error::InvalidTheta(format!(
                "theta dimension {} does not match ball dimension {}",
                theta.dim(),
                self.dim()
            )));
        }
        let key = theta.indices().to_vec();
        {
            let cache = self.theta_cache.lock().expect("theta cache poisoned");
            if let Some(v) = cache.get(&key) {
                return Ok(Arc::clone(v));
            }
        }
        let projected: Result<Vec<CartanVector>> = self
            .elements
            .par_iter()
            .map(|e| p_theta(&e.mu, theta))
            .collect();
        let projected = Arc::new(projected?);
        let mut cache = self.theta_cache.lock().expect("theta cache poisoned");
        Ok(Arc::clone(cache.entry(key).or_insert(projected)))
    }
}

/// Letter rank for lexicographic word order: `1 < -1 < 2 < -2 < ..`.
pub fn letter_rank(l: i32) -> usize {
    let idx = l.unsigned_abs() as usize;
    2 * (idx - 1) + usize::from(l < 0)
}

/// Quantized matrix fingerprint: entries relative to the largest one, plus
/// the log of the largest itself. The scale tag matters: long words converge
/// projectively to rank-one limits, so entry ratios alone would merge
/// distinct powers once their shapes agree to within the quantum.
fn dedup_key(g: &GroupElement) -> Vec<i64> {
    let scale = g
        .matrix()
        .iter()
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let quantum = DEDUP_SCALE * scale;
    let mut key: Vec<i64> = g
        .matrix()
        .iter()
        .map(|x| (x / quantum).round() as i64)
        .collect();
    key.push((scale.ln() / DEDUP_SCALE).round() as i64);
    key
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1usize;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

fn k_subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(d, k));
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        let mut i = k;
        while i > 0 {
            i -= 1;
            if current[i] < d - (k - i) {
                current[i] += 1;
                for j in i + 1..k {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return out;
            }
        }
    }
}

/// k-th compound of a matrix: entries are the k-by-k minors, indexed by
/// lexicographically ordered row and column subsets. Compounds are
/// multiplicative, and the top singular value of the k-th compound is the
/// product of the k largest singular values of the base matrix.
fn compound_matrix(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = m.nrows();
    let subsets = k_subsets(d, k);
    let n = subsets.len();
    DMatrix::from_fn(n, n, |ri, ci| {
        let sub = DMatrix::from_fn(k, k, |a, b| m[(subsets[ri][a], subsets[ci][b])]);
        sub.determinant()
    })
}

fn ln_top_singular(m: &DMatrix<f64>) -> Result<f64> {
    let sigma = m
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, s| acc.max(*s));
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::SingularOverflow(format!(
            "top singular value {sigma} is outside the usable range"
        )));
    }
    Ok(sigma.ln())
}

/// Cartan projection of a word product from the product matrix together with
/// its compound products for orders `2..d`.
///
/// Each entry is a difference of top-singular-value logs. The top singular
/// value of a float matrix is always relatively accurate, and the compound
/// products accumulate only letter-conditioned rounding per step, so the
/// small entries stay correct at depths where a direct decomposition of the
/// product matrix would drown them in noise of size `eps` times the largest
/// singular value.
fn mu_from_compounds(matrix: &DMatrix<f64>, compounds: &[DMatrix<f64>]) -> Result<CartanVector> {
    let d = matrix.nrows();
    let mut partial = Vec::with_capacity(d + 1);
    partial.push(0.0);
    partial.push(ln_top_singular(matrix)?);
    for c in compounds {
        partial.push(ln_top_singular(c)?);
    }
    partial.push(0.0);
    let mu: Vec<f64> = (1..=d).map(|k| partial[k] - partial[k - 1]).collect();
    Ok(CartanVector::recentered(mu))
}

/// Left singular direction for the largest singular value.
fn top_left_direction(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = m.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::InvalidMatrix("SVD failed".into()))?;
    let (mut best, mut best_sigma) = (0usize, f64::NEG_INFINITY);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > best_sigma {
            best_sigma = s;
            best = i;
        }
    }
    if !best_sigma.is_finite() || best_sigma <= 0.0 {
        return Err(Error::SingularOverflow(format!(
            "top singular value {best_sigma} is outside the usable range"
        )));
    }
    Ok(u.column(best).into_owned())
}

/// Left singular frame with columns ordered by decreasing singular value.
fn sorted_left_frame(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let svd = m.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::InvalidMatrix("SVD failed".into()))?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap());
    let mut us = DMatrix::<f64>::zeros(d, d);
    for (c, &i) in order.iter().enumerate() {
        us.set_column(c, &u.column(i));
    }
    Ok(us)
}

/// Minor coordinates of the leading `k` columns of `f` on the lexicographic
/// row-subset basis: the wedge of those columns as a `k`-vector.
fn leading_minor_vector(f: &DMatrix<f64>, k: usize) -> DVector<f64> {
    let subsets = k_subsets(f.nrows(), k);
    DVector::from_iterator(
        subsets.len(),
        subsets
            .iter()
            .map(|rows| DMatrix::from_fn(k, k, |a, b| f[(rows[a], b)]).determinant()),
    )
}

/// Cartan projection plus an orthonormal frame whose leading columns span
/// the expanding singular subspaces of a word product.
#[derive(Clone, Debug)]
pub struct CartanFrameData {
    pub mu: CartanVector,
    pub frame: DMatrix<f64>,
}

/// Folds explicit words through precomputed letter compounds, recovering
/// Cartan data that stays accurate at depths where the product matrix alone
/// has lost its small singular values to rounding. Build one folder per
/// generator set and reuse it across a batch of words.
pub struct WordFolder<'a> {
    gens: &'a GeneratorSet,
    letter_compounds: Vec<Vec<DMatrix<f64>>>,
}

impl<'a> WordFolder<'a> {
    pub fn new(gens: &'a GeneratorSet) -> Result<Self> {
        let d = gens.dim();
        let letter_compounds = gens
            .letters()
            .iter()
            .map(|&l| {
                let m = gens.letter(l)?.matrix().clone();
                Ok((2..d).map(|k| compound_matrix(&m, k)).collect())
            })
            .collect::<Result<_>>()?;
        Ok(WordFolder {
            gens,
            letter_compounds,
        })
    }

    fn fold(&self, word: &[i32]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        let d = self.gens.dim();
        let mut m = DMatrix::<f64>::identity(d, d);
        let mut compounds: Vec<DMatrix<f64>> = (2..d)
            .map(|k| DMatrix::identity(binomial(d, k), binomial(d, k)))
            .collect();
        for &l in word {
            let g = self.gens.letter(l)?;
            m = &m * g.matrix();
            for (c, step) in compounds
                .iter_mut()
                .zip(&self.letter_compounds[letter_rank(l)])
            {
                *c = &*c * step;
            }
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularOverflow(
                "word product overflowed the floating range".into(),
            ));
        }
        Ok((m, compounds))
    }

    /// Cartan projection of the word product.
    pub fn cartan(&self, word: &[i32]) -> Result<CartanVector> {
        if word.is_empty() {
            return Ok(CartanVector::zero(self.gens.dim()));
        }
        let (m, compounds) = self.fold(word)?;
        mu_from_compounds(&m, &compounds)
    }

    /// Cartan projection plus expanding frame.
    ///
    /// For `d = 3` the plane spanned by the two expanding columns is decoded
    /// from the top singular direction of the second compound, which is the
    /// plane of the element as a bivector. That direction keeps its relative
    /// accuracy at any depth, while the middle column read off the product
    /// matrix itself is destroyed once rounding of size `eps` times the top
    /// singular value exceeds the middle one. Other dimensions fall back to a
    /// direct decomposition of the product and are reliable only while the
    /// singular gaps stay above that rounding level.
    pub fn cartan_frames(&self, word: &[i32]) -> Result<CartanFrameData> {
        let d = self.gens.dim();
        if word.is_empty() {
            return Ok(CartanFrameData {
                mu: CartanVector::zero(d),
                frame: DMatrix::identity(d, d),
            });
        }
        let (m, compounds) = self.fold(word)?;
        let mu = mu_from_compounds(&m, &compounds)?;
        let frame = if d == 3 {
            let u1 = top_left_direction(&m)?;
            let b = top_left_direction(&compounds[0])?;
            // Bivector coordinates sit on the minor basis (01, 02, 12); the
            // plane normal is the alternating-sign reversal.
            let normal = Vector3::new(b[2], -b[1], b[0]);
            let mut line = Vector3::new(u1[0], u1[1], u1[2]);
            let nn = normal.norm();
            if nn <= 1e-8 {
                return Err(Error::SingularOverflow(
                    "expanding plane is numerically degenerate".into(),
                ));
            }
            let normal = normal / nn;
            line -= normal * normal.dot(&line);
            let ln = line.norm();
            if ln <= 1e-8 {
                return Err(Error::SingularOverflow(
                    "expanding line is numerically degenerate".into(),
                ));
            }
            let line = line / ln;
            let middle = normal.cross(&line);
            DMatrix::from_column_slice(
                3,
                3,
                &[
                    line[0], line[1], line[2], middle[0], middle[1], middle[2], normal[0],
                    normal[1], normal[2],
                ],
            )
        } else {
            sorted_left_frame(&m)?
        };
        Ok(CartanFrameData { mu, frame })
    }

    /// Iwasawa cocycle of the word product against a full flag frame, via
    /// volumes of the leading frame columns pushed through the compounds.
    /// The `k`-th triangular diagonal entry is a ratio of such volumes, so
    /// the small entries survive depths where a direct triangular
    /// factorization of the product drowns them in rounding.
    pub fn sigma(&self, word: &[i32], frame: &DMatrix<f64>) -> Result<CartanVector> {
        let d = self.gens.dim();
        if frame.nrows() != d || frame.ncols() != d {
            return Err(Error::InvalidArgument(format!(
                "frame is {}x{}, expected {d}x{d}",
                frame.nrows(),
                frame.ncols()
            )));
        }
        let (m, compounds) = self.fold(word)?;
        let mut vol = vec![0.0_f64; d + 1];
        for k in 1..d {
            let wedge = leading_minor_vector(frame, k);
            let pushed = if k == 1 { &m * wedge } else { &compounds[k - 2] * wedge };
            let norm = pushed.norm();
            if !norm.is_finite() || norm <= 0.0 {
                return Err(Error::SingularOverflow(
                    "frame is numerically degenerate along the word".into(),
                ));
            }
            vol[k] = norm.ln();
        }
        // The word product is unimodular, so the full volume is the frame's.
        let det = frame.determinant().abs();
        if !det.is_finite() || det <= 0.0 {
            return Err(Error::InvalidArgument(
                "frame is singular".into(),
            ));
        }
        vol[d] = det.ln();
        let sigma: Vec<f64> = (1..=d).map(|k| vol[k] - vol[k - 1]).collect();
        Ok(CartanVector::recentered(sigma))
    }
}

/// One-shot [`WordFolder::cartan`].
pub fn word_cartan(gens: &GeneratorSet, word: &[i32]) -> Result<CartanVector> {
    WordFolder::new(gens)?.cartan(word)
}

/// One-shot [`WordFolder::cartan_frames`].
pub fn word_cartan_frames(gens: &GeneratorSet, word: &[i32]) -> Result<CartanFrameData> {
    WordFolder::new(gens)?.cartan_frames(word)
}

/// One-shot [`WordFolder::sigma`].
pub fn word_sigma(
    gens: &GeneratorSet,
    word: &[i32],
    frame: &DMatrix<f64>,
) -> Result<CartanVector> {
    WordFolder::new(gens)?.sigma(word, frame)
}

/// Enumerates the orbit ball with the default element budget.
pub fn enumerate_ball(gens: &GeneratorSet, max_length: usize) -> Result<OrbitBall> {
    enumerate_ball_with_budget(gens, max_length, DEFAULT_BUDGET)
}

/// Enumerates all reduced words of length at most `max_length`, deduplicating
/// elements whose matrices agree after relative quantization at scale
/// [`DEDUP_SCALE`].
///
/// Levels are grown in order; extensions of one level are computed in
/// parallel but merged sequentially in deterministic (parent, letter) order,
/// so two runs produce identical balls. Exceeding the budget aborts with the
/// completed levels attached.
pub fn enumerate_ball_with_budget(
    gens: &GeneratorSet,
    max_length: usize,
    budget: usize,
) -> Result<OrbitBall> {
    let d = gens.dim();
    let letters = gens.letters();
    let identity = GroupElement::identity(d);
    let mut elements = vec![OrbitElement {
        word: Vec::new(),
        element: identity.clone(),
        mu: CartanVector::zero(d),
    }];
    let mut level_offsets = vec![0usize, 1];
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    seen.insert(dedup_key(&identity), 0);
    if budget == 0 {
        return Err(Error::BallBudgetExceeded {
            budget,
            reached: 0,
            partial: Box::new(OrbitBall::assemble(gens.clone(), 0, Vec::new(), vec![0, 0])),
        });
    }
    // Compound products of orders 2..d ride along with the current level so
    // every element's Cartan vector comes out of mu_from_compounds; they are
    // dropped once the ball is complete.
    let letter_compounds: Vec<Vec<DMatrix<f64>>> = letters
        .iter()
        .map(|&l| {
            let m = gens.letter(l)?.matrix().clone();
            Ok((2..d).map(|k| compound_matrix(&m, k)).collect())
        })
        .collect::<Result<_>>()?;
    let mut carried: Vec<Vec<DMatrix<f64>>> =
        vec![(2..d).map(|k| DMatrix::identity(binomial(d, k), binomial(d, k))).collect()];

    // Parents are processed in bounded chunks: candidates of one chunk are
    // computed in parallel, then merged sequentially in (parent, letter)
    // order, so the result is deterministic and the transient allocation
    // stays small even for balls with millions of elements.
    const PARENT_CHUNK: usize = 16_384;
    type Candidate = (Vec<i32>, GroupElement, CartanVector, Vec<i64>, Vec<DMatrix<f64>>);
    for level in 1..=max_length {
        let level_start = level_offsets[level - 1];
        let level_end = level_offsets[level];
        let mut next_carried = Vec::new();
        let mut chunk_start = level_start;
        while chunk_start < level_end {
            let chunk_end = (chunk_start + PARENT_CHUNK).min(level_end);
            let parents = &elements[chunk_start..chunk_end];
            let carried_slice = &carried[chunk_start - level_start..chunk_end - level_start];
            let candidate_groups: Vec<Result<Vec<Candidate>>> = parents
                .par_iter()
                .zip(carried_slice.par_iter())
                .map(|(parent, parent_compounds)| {
                    let mut out = Vec::with_capacity(letters.len());
                    for (li, &l) in letters.iter().enumerate() {
                        if parent.word.last() == Some(&-l) {
                            continue;
                        }
                        let element = parent.element.mul(gens.letter(l)?)?;
                        let compounds: Vec<DMatrix<f64>> = parent_compounds
                            .iter()
                            .zip(&letter_compounds[li])
                            .map(|(p, lc)| p * lc)
                            .collect();
                        let mu = mu_from_compounds(element.matrix(), &compounds)?;
                        let key = dedup_key(&element);
                        let mut word = parent.word.clone();
                        word.push(l);
                        out.push((word, element, mu, key, compounds));
                    }
                    Ok(out)
                })
                .collect();
            for group in candidate_groups {
                for (word, element, mu, key, compounds) in group? {
                    if seen.contains_key(&key) {
                        continue;
                    }
                    if elements.len() >= budget {
                        let reached = elements.len();
                        elements.truncate(level_end);
                        level_offsets.truncate(level + 1);
                        return Err(Error::BallBudgetExceeded {
                            budget,
                            reached,
                            partial: Box::new(OrbitBall::assemble(
                                gens.clone(),
                                level - 1,
                                elements,
                                level_offsets,
                            )),
                        });
                    }
                    seen.insert(key, elements.len());
                    elements.push(OrbitElement { word, element, mu });
                    next_carried.push(compounds);
                }
            }
            chunk_start = chunk_end;
        }
        carried = next_carried;
        level_offsets.push(elements.len());
    }
    Ok(OrbitBall::assemble(gens.clone(), max_length, elements, level_offsets))
}

/// Per-length minima of the smallest requested simple-root value of the
/// Cartan projection, with a linear fit and a non-regularity flag.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    /// (word length, min over the level of min over theta of alpha_i(mu)).
    pub per_length: Vec<(usize, f64)>,
    /// Least-squares fit over all lengths, when at least two are present.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// Fit restricted to the final third of lengths.
    pub tail_slope: Option<f64>,
    /// Raised when the tail slope fails to be positive: root values are not
    /// growing along long words, so the orbit does not look regular in the
    /// requested directions. A finite ball can only report this trend, never
    /// certify the asymptotic property.
    pub flagged: bool,
}

fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Tabulates how fast the requested root values of `mu` grow with word
/// length.
///
/// An identity-only ball yields an empty table; depths between 1 and
/// [`MIN_REGULARITY_LENGTH`] are rejected as insufficient for a trend.
pub fn regularity_report(ball: &OrbitBall, theta: &ThetaSet) -> Result<RegularityReport> {
    if theta.dim() != ball.dim() {
        return Err(Error::InvalidTheta(format!(
            "theta dimension {} does not match ball dimension {}",
            theta.dim(),
            ball.dim()
        )));
    }
    if ball.max_length() == 0 {
        return Ok(RegularityReport {
            per_length: Vec::new(),
            slope: None,
            intercept: None,
            tail_slope: None,
            flagged: false,
        });
    }
    if ball.max_length() < MIN_REGULARITY_LENGTH {
        return Err(Error::InsufficientData(format!(
            "regularity trend needs depth >= {MIN_REGULARITY_LENGTH}, ball has {}",
            ball.max_length()
        )));
    }
    let mut per_length = Vec::with_capacity(ball.max_length());
    for l in 1..=ball.max_length() {
        let min = ball
            .level(l)
            .iter()
            .map(|e| {
                theta
                    .indices()
                    .iter()
                    .map(|&i| e.mu.simple_root(i))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        per_length.push((l, min));
    }
    let points: Vec<(f64, f64)> = per_length.iter().map(|&(l, m)| (l as f64, m)).collect();
    let fit = least_squares(&points);
    let tail_len = ball.max_length().div_ceil(3).max(2);
    let tail = &points[points.len() - tail_len.min(points.len())..];
    let tail_fit = least_squares(tail);
    let flagged = match tail_fit {
        Some((s, _)) => s <= 1e-9,
        None => false,
    };
    Ok(RegularityReport {
        per_length,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        tail_slope: tail_fit.map(|f| f.0),
        flagged,
    })
}

#[derive(Deserialize)]
struct FixtureFile {
    d: usize,
    #[serde(default)]
    generator: Vec<FixtureGenerator>,
}

#[derive(Deserialize)]
struct FixtureGenerator {
    label: Option<String>,
    rows: Vec<f64>,
}

/// Loads a generator set from a structured text file with fields `d` and
/// repeated `[[generator]]` tables carrying `rows` (row-major entries) and an
/// optional `label`.
pub fn load_generator_file(path: &Path) -> Result<GeneratorSet> {
    let text = std::fs::read_to_string(path)?;
    let parsed: FixtureFile = toml::from_str(&text)
        .map_err(|e| Error::Fixture(format!("{}: {e}", path.display())))?;
    if parsed.generator.is_empty() {
        return Err(Error::Fixture(format!(
            "{}: no generators defined",
            path.display()
        )));
    }
    let mut gens = Vec::with_capacity(parsed.generator.len());
    let mut labels = Vec::with_capacity(parsed.generator.len());
    for (i, entry) in parsed.generator.into_iter().enumerate() {
        gens.push(GroupElement::from_rows(parsed.d, &entry.rows)?);
        labels.push(entry.label.unwrap_or_else(|| format!("g{}", i + 1)));
    }
    GeneratorSet::new(gens, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cartan::cartan_projection;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn schottky_pair() -> GeneratorSet {
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let b = GroupElement::from_rows(2, &[5.0, -3.0, -3.0, 2.0]).unwrap();
        GeneratorSet::new(vec![a, b], Some(vec!["a".into(), "b".into()])).unwrap()
    }

    fn block_embed(m: &DMatrix<f64>, first: bool) -> GroupElement {
        let mut out = DMatrix::<f64>::identity(4, 4);
        let off = if first { 0 } else { 2 };
        for r in 0..2 {
            for c in 0..2 {
                out[(off + r, off + c)] = m[(r, c)];
            }
        }
        GroupElement::new(out).unwrap()
    }

    #[test]
    fn free_group_ball_counts() {
        let gens = schottky_pair();
        let ball = enumerate_ball(&gens, 3).unwrap();
        assert_eq!(ball.len(), 53);
        assert_eq!(ball.level(0).len(), 1);
        assert_eq!(ball.level(1).len(), 4);
        assert_eq!(ball.level(2).len(), 12);
        assert_eq!(ball.level(3).len(), 36);
    }

    #[test]
    fn depth_zero_ball_is_identity_only() {
        let gens = schottky_pair();
        let ball = enumerate_ball(&gens, 0).unwrap();
        assert_eq!(ball.len(), 1);
        assert!(ball.elements()[0].word.is_empty());
        assert!(ball.elements()[0].mu.norm() < 1e-14);
    }

    #[test]
    fn cyclic_diagonal_ball() {
        let e = std::f64::consts::E;
        let a = GroupElement::from_rows(2, &[e, 0.0, 0.0, 1.0 / e]).unwrap();
        let gens = GeneratorSet::new(vec![a], Some(vec!["a".into()])).unwrap();
        let ball = enumerate_ball(&gens, 5).unwrap();
        assert_eq!(ball.len(), 11);
        for el in ball.elements() {
            let n = el.word.len() as f64;
            assert_relative_eq!(el.mu.entry(0), n, epsilon = 1e-12);
            assert_relative_eq!(el.mu.entry(1), -n, epsilon = 1e-12);
        }
    }

    #[test]
    fn enumeration_is_deterministic() {
        let gens = schottky_pair();
        let b1 = enumerate_ball(&gens, 5).unwrap();
        let b2 = enumerate_ball(&gens, 5).unwrap();
        assert_eq!(b1.len(), b2.len());
        for (x, y) in b1.elements().iter().zip(b2.elements()) {
            assert_eq!(x.word, y.word);
            assert_eq!(x.element.matrix(), y.element.matrix());
        }
    }

    #[test]
    fn words_are_ordered_by_length_then_rank() {
        let gens = schottky_pair();
        let ball = enumerate_ball(&gens, 4).unwrap();
        for pair in ball.elements().windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert!(a.word.len() <= b.word.len());
            if a.word.len() == b.word.len() {
                let ra: Vec<usize> = a.word.iter().map(|&l| letter_rank(l)).collect();
                let rb: Vec<usize> = b.word.iter().map(|&l| letter_rank(l)).collect();
                assert!(ra < rb);
            }
        }
    }

    #[test]
    fn commuting_generators_are_deduplicated() {
        let a = DMatrix::from_row_slice(2, 2, &[5.0, 3.0, 3.0, 2.0]);
        let gens = GeneratorSet::new(
            vec![block_embed(&a, true), block_embed(&a, false)],
            Some(vec!["x".into(), "y".into()]),
        )
        .unwrap();
        // Reduced words of length <= 2 number 1 + 4 + 12, but xy = yx and
        // x^-1 y = y x^-1 etc. merge: distinct elements are pairs (i, j)
        // with |i| + |j| <= 2, of which there are 13.
        let ball = enumerate_ball(&gens, 2).unwrap();
        assert_eq!(ball.len(), 13);
    }

    #[test]
    fn budget_overflow_returns_partial_ball() {
        let gens = schottky_pair();
        let err = enumerate_ball_with_budget(&gens, 4, 20).unwrap_err();
        match err {
            Error::BallBudgetExceeded {
                budget,
                reached,
                partial,
            } => {
                assert_eq!(budget, 20);
                assert!(reached >= 17);
                // Completed levels only: depth 2 holds 17 elements.
                assert_eq!(partial.len(), 17);
                assert_eq!(partial.max_length(), 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn norm_subadditivity_along_words() {
        let gens = schottky_pair();
        let ball = enumerate_ball(&gens, 6).unwrap();
        let per_letter: f64 = (1..=2)
            .map(|i| {
                cartan_projection(gens.letter(i).unwrap())
                    .unwrap()
                    .norm()
            })
            .fold(0.0, f64::max);
        // Pure powers of the symmetric generator meet the bound exactly, so
        // the slack only absorbs rounding.
        for el in ball.elements() {
            assert!(el.mu.norm() <= el.word.len() as f64 * per_letter + 1e-8);
        }
    }

    #[test]
    fn deep_powers_keep_full_cartan_accuracy() {
        // mu of a power of a symmetric positive matrix is the power times mu
        // of the base. At depth 12 the small singular value sits far below
        // the noise floor of a direct decomposition of the product, so this
        // only passes through the compound bookkeeping.
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let m1 = cartan_projection(&a).unwrap().entry(0);
        let gens = GeneratorSet::new(vec![a], None).unwrap();
        let ball = enumerate_ball(&gens, 12).unwrap();
        let deep = &ball.level(12)[0];
        assert_relative_eq!(deep.mu.entry(0), 12.0 * m1, epsilon = 1e-9);
        assert_relative_eq!(deep.mu.entry(1), -12.0 * m1, epsilon = 1e-9);
    }

    #[test]
    fn deep_middle_singular_values_stay_pinned() {
        // Symmetric square of the hyperbolic generator: spectra are
        // (2t, 0, -2t), so the middle entry must stay at zero even when the
        // spread reaches e^{30}.
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let t = crate::typea::irreducible_rep(&a, 3).unwrap();
        let m1 = cartan_projection(&t).unwrap().entry(0);
        let gens = GeneratorSet::new(vec![t], None).unwrap();
        let ball = enumerate_ball(&gens, 8).unwrap();
        let deep = &ball.level(8)[0];
        assert_relative_eq!(deep.mu.entry(0), 8.0 * m1, epsilon = 1e-9);
        assert!(deep.mu.entry(1).abs() < 1e-10);
        assert_relative_eq!(deep.mu.entry(2), -8.0 * m1, epsilon = 1e-9);
    }

    #[test]
    fn element_inverse_reverses_the_word() {
        let gens = schottky_pair();
        let ball = enumerate_ball(&gens, 4).unwrap();
        let idx = ball.find(&[1, -2, 1, 1]).unwrap();
        let inv = ball.element_inverse(idx).unwrap();
        let product = ball.elements()[idx].element.mul(&inv).unwrap();
        let dev = (product.matrix() - DMatrix::<f64>::identity(2, 2))
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(dev < 1e-9);
        assert!(ball.element_inverse(ball.len()).is_err());
    }

    #[test]
    fn find_and_word_to_element_agree() {
        let gens = schottky_pair();
        let ball = enumerate_ball(&gens, 4).unwrap();
        let word = vec![1, -2, 1];
        let idx = ball.find(&word).unwrap();
        let direct = gens.word_to_element(&word).unwrap();
        let dev = (ball.elements()[idx].element.matrix() - direct.matrix())
            .iter()
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        assert!(dev < 1e-10);
        assert!(ball.find(&[1, -1]).is_none());
    }

    #[test]
    fn mu_theta_cache_returns_shared_projections() {
        let gens = schottky_pair();
        let ball = enumerate_ball(&gens, 3).unwrap();
        let theta = ThetaSet::full(2);
        let a = ball.mu_theta(&theta).unwrap();
        let b = ball.mu_theta(&theta).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        for (proj, el) in a.iter().zip(ball.elements()) {
            assert!(proj.distance(&el.mu) < 1e-12);
        }
    }

    #[test]
    fn regularity_grows_for_hyperbolic_cyclic_group() {
        let e = std::f64::consts::E;
        let a = GroupElement::from_rows(2, &[e, 0.0, 0.0, 1.0 / e]).unwrap();
        let gens = GeneratorSet::new(vec![a], None).unwrap();
        let ball = enumerate_ball(&gens, 8).unwrap();
        let report = regularity_report(&ball, &ThetaSet::full(2)).unwrap();
        assert_eq!(report.per_length.len(), 8);
        for (l, m) in &report.per_length {
            assert_relative_eq!(*m, 2.0 * *l as f64, epsilon = 1e-10);
        }
        assert!(report.slope.unwrap() > 1.9);
        assert!(!report.flagged);
    }

    #[test]
    fn regularity_flags_degenerate_direction() {
        let a = DMatrix::from_row_slice(2, 2, &[5.0, 3.0, 3.0, 2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[5.0, -3.0, -3.0, 2.0]);
        let gens = GeneratorSet::new(
            vec![
                block_embed(&a, true),
                block_embed(&b, true),
                block_embed(&a, false),
                block_embed(&b, false),
            ],
            None,
        )
        .unwrap();
        let ball = enumerate_ball(&gens, 4).unwrap();
        // Along words using only the first factor, the middle singular
        // values stay equal, so the alpha_2 minima never grow.
        let report = regularity_report(&ball, &ThetaSet::new(4, [2]).unwrap()).unwrap();
        for (_, m) in &report.per_length {
            assert!(m.abs() < 1e-9);
        }
        assert!(report.flagged);
    }

    #[test]
    fn regularity_report_edge_cases() {
        let gens = schottky_pair();
        let empty = enumerate_ball(&gens, 0).unwrap();
        let report = regularity_report(&empty, &ThetaSet::full(2)).unwrap();
        assert!(report.per_length.is_empty());
        assert!(!report.flagged);
        let shallow = enumerate_ball(&gens, 2).unwrap();
        assert!(matches!(
            regularity_report(&shallow, &ThetaSet::full(2)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn generator_set_rejects_identity_and_mixed_dims() {
        let id = GroupElement::identity(2);
        assert!(GeneratorSet::new(vec![id], None).is_err());
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let c = GroupElement::identity(3);
        assert!(GeneratorSet::new(
            vec![a, c],
            Some(vec!["a".into(), "c".into()])
        )
        .is_err());
    }

    #[test]
    fn fixture_file_round_trip() {
        let path = std::env::temp_dir().join(format!(
            "translab-fixture-test-{}.toml",
            std::process::id()
        ));
        std::fs::write(
            &path,
            r#"
d = 2

[[generator]]
label = "a"
rows = [5.0, 3.0, 3.0, 2.0]

[[generator]]
rows = [5.0, -3.0, -3.0, 2.0]
"#,
        )
        .unwrap();
        let gens = load_generator_file(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(gens.rank(), 2);
        assert_eq!(gens.labels()[0], "a");
        assert_eq!(gens.labels()[1], "g2");
        assert_eq!(gens.dim(), 2);

        let bad = std::env::temp_dir().join(format!(
            "translab-fixture-bad-{}.toml",
            std::process::id()
        ));
        std::fs::write(&bad, "d = 2\n").unwrap();
        assert!(matches!(
            load_generator_file(&bad),
            Err(Error::Fixture(_))
        ));
        std::fs::remove_file(&bad).ok();
    }

    #[test]
    fn word_labels_render() {
        let gens = schottky_pair();
        assert_eq!(gens.word_label(&[]), "e");
        assert_eq!(gens.word_label(&[1, -2]), "a·b^-1");
    }

    #[test]
    fn folder_cartan_matches_direct_projection_on_moderate_words() {
        let gens = schottky_pair();
        let folder = WordFolder::new(&gens).unwrap();
        for word in [vec![1], vec![1, 2], vec![1, -2, 1, 1], vec![-2, -2, 1]] {
            let folded = folder.cartan(&word).unwrap();
            let direct = cartan_projection(&gens.word_to_element(&word).unwrap()).unwrap();
            for (x, y) in folded.entries().iter().zip(direct.entries()) {
                assert_relative_eq!(x, y, epsilon = 1e-10);
            }
        }
        assert_eq!(folder.cartan(&[]).unwrap().norm(), 0.0);
    }

    #[test]
    fn folder_cartan_keeps_deep_middle_entries_pinned() {
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let t = crate::typea::irreducible_rep(&a, 3).unwrap();
        let m1 = cartan_projection(&t).unwrap().entries()[0];
        let gens = GeneratorSet::new(vec![t], None).unwrap();
        let word = vec![1; 12];
        let mu = word_cartan(&gens, &word).unwrap();
        assert_relative_eq!(mu.entries()[0], 12.0 * m1, epsilon = 1e-9);
        assert!(mu.entries()[1].abs() < 1e-9);
        assert_relative_eq!(mu.entries()[2], -12.0 * m1, epsilon = 1e-9);
    }

    #[test]
    fn folder_frames_are_orthonormal_and_match_shallow_decompositions() {
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let b = GroupElement::from_rows(2, &[5.0, -3.0, -3.0, 2.0]).unwrap();
        let t3 = |g: &GroupElement| crate::typea::irreducible_rep(g, 3).unwrap();
        let gens = GeneratorSet::new(vec![t3(&a), t3(&b)], None).unwrap();
        let word = vec![1, -2, 1];
        let data = word_cartan_frames(&gens, &word).unwrap();
        let gram = data.frame.transpose() * &data.frame;
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_relative_eq!(gram[(r, c)], want, epsilon = 1e-9);
            }
        }
        assert_relative_eq!(data.frame.determinant(), 1.0, epsilon = 1e-9);
        let (mu, u, _) = crate::cartan::cartan_with_frames(&gens.word_to_element(&word).unwrap())
            .unwrap();
        // The direct decomposition is the less accurate side at this
        // condition number, so the comparison is loose.
        for (x, y) in data.mu.entries().iter().zip(mu.entries()) {
            assert_relative_eq!(x, y, epsilon = 1e-7, max_relative = 1e-7);
        }
        for c in 0..3 {
            let dot: f64 = (0..3).map(|r| data.frame[(r, c)] * u[(r, c)]).sum();
            assert!(dot.abs() > 1.0 - 1e-7, "column {c} misaligned: |dot| = {}", dot.abs());
        }
    }

    #[test]
    fn folder_frames_pin_the_deep_expanding_line() {
        // The generator is symmetric, so every power shares its eigenframe
        // and the deep frame columns can be checked against the shallow ones.
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let t = crate::typea::irreducible_rep(&a, 3).unwrap();
        let gens = GeneratorSet::new(vec![t], None).unwrap();
        let shallow = word_cartan_frames(&gens, &[1]).unwrap();
        let deep = word_cartan_frames(&gens, &[1; 12]).unwrap();
        for c in 0..3 {
            let dot: f64 = (0..3).map(|r| shallow.frame[(r, c)] * deep.frame[(r, c)]).sum();
            assert!(
                dot.abs() > 1.0 - 1e-9,
                "column {c} drifted: |dot| = {}",
                dot.abs()
            );
        }
    }

    #[test]
    fn folder_sigma_matches_triangular_factorization_when_shallow() {
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let b = GroupElement::from_rows(2, &[5.0, -3.0, -3.0, 2.0]).unwrap();
        let t3 = |g: &GroupElement| crate::typea::irreducible_rep(g, 3).unwrap();
        let gens = GeneratorSet::new(vec![t3(&a), t3(&b)], None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let frame = crate::cartan::random_rotation(3, &mut rng).matrix().clone();
        // Short enough that the triangular reference keeps its small
        // diagonal entries above rounding.
        let word = vec![1, 2];
        let folded = word_sigma(&gens, &word, &frame).unwrap();
        let direct = crate::cartan::iwasawa_sigma(&gens.word_to_element(&word).unwrap(), &frame)
            .unwrap();
        for (x, y) in folded.entries().iter().zip(direct.entries()) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn folder_sigma_splits_as_a_cocycle() {
        let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0]).unwrap();
        let b = GroupElement::from_rows(2, &[5.0, -3.0, -3.0, 2.0]).unwrap();
        let t3 = |g: &GroupElement| crate::typea::irreducible_rep(g, 3).unwrap();
        let gens = GeneratorSet::new(vec![t3(&a), t3(&b)], None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let frame = crate::cartan::random_rotation(3, &mut rng).matrix().clone();
        let (head, tail) = ([1, -2], [2, 2, -1]);
        let h = gens.word_to_element(&tail).unwrap();
        let rotated = (h.matrix() * &frame).qr().q();
        let full: Vec<i32> = head.iter().chain(tail.iter()).copied().collect();
        let lhs = word_sigma(&gens, &full, &frame).unwrap();
        let split = word_sigma(&gens, &head, &rotated)
            .unwrap()
            .add(&word_sigma(&gens, &tail, &frame).unwrap());
        for (x, y) in lhs.entries().iter().zip(split.entries()) {
            assert_relative_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn subgroup_generators_enumerate_as_free_letters() {
        let gens = schottky_pair();
        let cyclic = gens.subgroup(&[vec![1]]).unwrap();
        assert_eq!(enumerate_ball(&cyclic, 3).unwrap().len(), 7);
        let pair = gens.subgroup(&[vec![1], vec![2, 1, -2]]).unwrap();
        let ball = enumerate_ball(&pair, 2).unwrap();
        assert_eq!(ball.len(), 17);
        assert_eq!(pair.labels()[1], "b·a·b^-1");
        assert!(gens.subgroup(&[]).is_err());
    }
}
