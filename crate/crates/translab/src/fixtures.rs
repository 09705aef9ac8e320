//! Builtin generator sets used across tests and the command-line tool,
//! plus loading of user-supplied generator files.

use std::path::Path;

use nalgebra::DMatrix;

use crate::cartan::GroupElement;
use crate::error::Error;
use crate::orbit::{load_generator_file, GeneratorSet};
use crate::typea::irreducible_rep;
use crate::Result;

/// A named generator set.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub generators: GeneratorSet,
}

/// Builds a block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::<f64>::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        for r in 0..b.nrows() {
            for c in 0..b.ncols() {
                out[(off + r, off + c)] = b[(r, c)];
            }
        }
        off += b.nrows();
    }
    out
}

/// Rotation of 3-space about `axis` by `angle`.
fn rotation3(axis: [f64; 3], angle: f64) -> DMatrix<f64> {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (x, y, z) = (axis[0] / n, axis[1] / n, axis[2] / n);
    let k = DMatrix::from_row_slice(3, 3, &[0.0, -z, y, z, 0.0, -x, -y, x, 0.0]);
    let eye = DMatrix::<f64>::identity(3, 3);
    eye + angle.sin() * &k + (1.0 - angle.cos()) * (&k * &k)
}

fn symmetric_free_pair() -> Result<(GroupElement, GroupElement)> {
    let a = GroupElement::from_rows(2, &[5.0, 3.0, 3.0, 2.0])?;
    let b = GroupElement::from_rows(2, &[5.0, -3.0, -3.0, 2.0])?;
    Ok((a, b))
}

/// Names of the builtin fixtures.
pub fn builtin_names() -> Vec<&'static str> {
    vec![
        "schottky2",
        "schottky2-tau3",
        "schottky2-tau4",
        "pingpong-sl3",
        "selfjoin-sl2xsl2",
        "cyclic-diag",
    ]
}

/// Returns a builtin fixture by name.
pub fn builtin(name: &str) -> Result<Fixture> {
    match name {
        "schottky2" => {
            let (a, b) = symmetric_free_pair()?;
            Ok(Fixture {
                name: name.to_string(),
                description: "free pair of symmetric proximal elements in dimension 2".to_string(),
                generators: GeneratorSet::new(vec![a, b], Some(vec!["a".into(), "b".into()]))?,
            })
        }
        "schottky2-tau3" => {
            let (a, b) = symmetric_free_pair()?;
            Ok(Fixture {
                name: name.to_string(),
                description: "the free pair pushed through the irreducible 3-dimensional representation"
                    .to_string(),
                generators: GeneratorSet::new(
                    vec![irreducible_rep(&a, 3)?, irreducible_rep(&b, 3)?],
                    Some(vec!["a".into(), "b".into()]),
                )?,
            })
        }
        "schottky2-tau4" => {
            let (a, b) = symmetric_free_pair()?;
            Ok(Fixture {
                name: name.to_string(),
                description: "the free pair pushed through the irreducible 4-dimensional representation"
                    .to_string(),
                generators: GeneratorSet::new(
                    vec![irreducible_rep(&a, 4)?, irreducible_rep(&b, 4)?],
                    Some(vec!["a".into(), "b".into()]),
                )?,
            })
        }
        "pingpong-sl3" => {
            let d = DMatrix::from_row_slice(3, 3, &[
                5.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, //
                0.0, 0.0, 0.2,
            ]);
            let r = rotation3([1.0, 2.0, 3.0], 1.1);
            let conj = &r * &d * r.transpose();
            Ok(Fixture {
                name: name.to_string(),
                description: "a diagonal stretch in dimension 3 and its conjugate by a generic rotation"
                    .to_string(),
                generators: GeneratorSet::new(
                    vec![GroupElement::new(d)?, GroupElement::new(conj)?],
                    Some(vec!["a".into(), "b".into()]),
                )?,
            })
        }
        "selfjoin-sl2xsl2" => {
            let (a, b) = symmetric_free_pair()?;
            let eye = DMatrix::<f64>::identity(2, 2);
            let top = |m: &GroupElement| block_diag(&[m.matrix().clone(), eye.clone()]);
            let bot = |m: &GroupElement| block_diag(&[eye.clone(), m.matrix().clone()]);
            Ok(Fixture {
                name: name.to_string(),
                description: "two commuting copies of the free pair on complementary 2-dimensional blocks"
                    .to_string(),
                generators: GeneratorSet::new(
                    vec![
                        GroupElement::new(top(&a))?,
                        GroupElement::new(top(&b))?,
                        GroupElement::new(bot(&a))?,
                        GroupElement::new(bot(&b))?,
                    ],
                    Some(vec!["a1".into(), "b1".into(), "a2".into(), "b2".into()]),
                )?,
            })
        }
        "cyclic-diag" => {
            let e = std::f64::consts::E;
            let a = GroupElement::from_rows(2, &[e, 0.0, 0.0, 1.0 / e])?;
            Ok(Fixture {
                name: name.to_string(),
                description: "a single diagonal hyperbolic element in dimension 2".to_string(),
                generators: GeneratorSet::new(vec![a], Some(vec!["a".into()]))?,
            })
        }
        other => Err(Error::Fixture(format!("unknown builtin fixture '{other}'"))),
    }
}

/// Resolves a fixture by builtin name or file path.
pub fn load(spec: &str) -> Result<Fixture> {
    if builtin_names().contains(&spec) {
        return builtin(spec);
    }
    let path = Path::new(spec);
    if path.exists() {
        let generators = load_generator_file(path)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("custom")
            .to_string();
        Ok(Fixture {
            name,
            description: format!("generators loaded from {}", path.display()),
            generators,
        })
    } else {
        Err(Error::Fixture(format!(
            "'{spec}' is neither a builtin fixture nor an existing file"
        )))
    }
}
