use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::models::DiscriminatorModel;

/// Per-coordinate affine map to zero mean and unit variance, fitted on one
/// split and applied unchanged to others. Constant coordinates are only
/// centred.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit<V: AsRef<[f64]>>(rows: &[V]) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::contract("cannot standardize an empty set"))?
            .as_ref();
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::contract("rows of unequal length"));
            }
            mean.iter_mut().zip(r).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::contract(format!(
                "row has {} coordinates, standardizer expects {}",
                x.len(),
                self.mean.len()
            )));
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    pub fn apply_all<V: AsRef<[f64]>>(&self, rows: &[V]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r.as_ref())).collect()
    }
}

/// D-pool baseline: the mean activation of each hidden layer of `d`, one
/// coordinate per layer, for every row of `x`.
pub fn dpool_features(d: &DiscriminatorModel, x: &Tensor) -> Result<Vec<Vec<f64>>> {
    let (n, dim) = x.dims2()?;
    if dim != d.input_dim() {
        return Err(Error::contract(format!(
            "examples have {dim} features, discriminator expects {}",
            d.input_dim()
        )));
    }
    let layers = d.hidden_activations(x)?;
    Ok((0..n)
        .map(|i| {
            layers
                .iter()
                .map(|h| {
                    let row = h.row(i);
                    row.iter().sum::<f64>() / row.len() as f64
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::MlpSpec;
    use crate::rng::SeededRng;

    #[test]
    fn standardizer_uses_fit_statistics() {
        let s = Standardizer::fit(&[[1.0, 5.0], [3.0, 5.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[4.0, 6.0]).unwrap(), vec![2.0, 1.0]);
        assert!(s.apply(&[1.0]).is_err());
        assert!(Standardizer::fit::<[f64; 1]>(&[]).is_err());
    }

    #[test]
    fn dpool_has_one_coordinate_per_hidden_layer() {
        let mut rng = SeededRng::from_seed(1);
        let d = DiscriminatorModel::init(MlpSpec::discriminator(2, &[64, 64]).unwrap(), true, &mut rng);
        let x = Tensor::from_rows(&[[0.1, 0.2], [1.0, -1.0]]).unwrap();
        let f = dpool_features(&d, &x).unwrap();
        assert_eq!(f.len(), 2);
        assert!(f.iter().all(|r| r.len() == 2));
        assert_eq!(f, dpool_features(&d, &x).unwrap());
        assert!(dpool_features(&d, &Tensor::from_rows(&[[1.0]]).unwrap()).is_err());
    }

    #[test]
    fn zero_weight_discriminator_gives_constant_features() {
        let mut rng = SeededRng::from_seed(2);
        let mut d = DiscriminatorModel::init(MlpSpec::discriminator(2, &[8, 8]).unwrap(), false, &mut rng);
        d.params_mut().values_mut().fill(0.0);
        let x = Tensor::from_rows(&[[0.1, 0.2], [5.0, -3.0], [0.0, 0.0]]).unwrap();
        let f = dpool_features(&d, &x).unwrap();
        assert!(f.iter().all(|r| r == &f[0]));
    }
}
