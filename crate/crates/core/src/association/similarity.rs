use crate::error::{Error, Result};

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroVector(None));
    }
    Ok(cosine_with_norms(u, nu, v, nv))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine_with_norms(u: &[f64], nu: f64, v: &[f64], nv: f64) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (dot / (nu * nv)).clamp(-1.0, 1.0)
}

/// Cosines between every target row and every attribute column, computed once.
///
/// Columns hold the A attributes first, then the B attributes.
#[derive(Debug, Clone)]
pub(crate) struct AssociationTable {
    n_a: usize,
    n_b: usize,
    cos: Vec<Vec<f64>>,
}

impl AssociationTable {
    pub(crate) fn new(targets: &[&[f64]], a: &[&[f64]], b: &[&[f64]]) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptySet("attribute set".into()));
        }
        let dim = targets
            .first()
            .or(a.first())
            .map(|v| v.len())
            .unwrap_or_default();
        let norms = |vs: &[&[f64]]| -> Result<Vec<f64>> {
            vs.iter()
                .map(|v| {
                    if v.len() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: v.len(),
                        });
                    }
                    let n = norm(v);
                    if n == 0.0 {
                        Err(Error::ZeroVector(None))
                    } else {
                        Ok(n)
                    }
                })
                .collect()
        };
        let target_norms = norms(targets)?;
        let attrs: Vec<&[f64]> = a.iter().chain(b).copied().collect();
        let attr_norms = norms(&attrs)?;
        let cos = targets
            .iter()
            .zip(&target_norms)
            .map(|(t, &nt)| {
                attrs
                    .iter()
                    .zip(&attr_norms)
                    .map(|(x, &nx)| cosine_with_norms(t, nt, x, nx))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_a: a.len(),
            n_b: b.len(),
            cos,
        })
    }

    /// `mean cos(E, A) - mean cos(E, B)` for every target row.
    pub(crate) fn item_scores(&self) -> Vec<f64> {
        self.cos
            .iter()
            .map(|row| {
                let (ra, rb) = row.split_at(self.n_a);
                ra.iter().sum::<f64>() / self.n_a as f64 - rb.iter().sum::<f64>() / self.n_b as f64
            })
            .collect()
    }

    /// Per-attribute column sums of cosines over all targets (A columns, then B).
    pub(crate) fn attribute_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_a + self.n_b];
        for row in &self.cos {
            for (t, c) in totals.iter_mut().zip(row) {
                *t += c;
            }
        }
        totals
    }
}
