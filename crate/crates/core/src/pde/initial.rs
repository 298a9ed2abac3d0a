use serde::{Deserialize, Serialize};

use crate::barriers::BarrierSpec;
use crate::error::{Error, Result};
use crate::reaction::Nonlinearity;
use crate::tree::RegularTree;

use super::grid::Grid;

fn one() -> f64 {
    1.0
}

/// Radially symmetric initial data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude` on `ρ < radius`, zero beyond.
    Indicator {
        radius: f64,
        amplitude: f64,
    },
    /// Linear interpolation through `(rho, values)`, constant beyond the ends.
    Samples {
        rho: Vec<f64>,
        values: Vec<f64>,
    },
    /// A barrier profile multiplied by `scale`.
    Barrier {
        barrier: BarrierSpec,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl InitialData {
    /// Cell values on `grid`; fails if any value leaves `[0, 1]`.
    pub fn sample(&self, grid: &Grid, tree: &RegularTree, f: &Nonlinearity) -> Result<Vec<f64>> {
        let values = match self {
            InitialData::Zero => vec![0.0; grid.n_cells()],
            InitialData::Constant { value } => vec![*value; grid.n_cells()],
            InitialData::Indicator { radius, amplitude } => {
                grid.sample(|x| if x < *radius { *amplitude } else { 0.0 })
            }
            InitialData::Samples { rho, values } => {
                if rho.is_empty()
                    || rho.len() != values.len()
                    || rho.windows(2).any(|w| !(w[1] > w[0]))
                {
                    return Err(Error::OutOfRange(
                        "samples need matching, strictly increasing rho and values".into(),
                    ));
                }
                grid.sample(|x| {
                    let i = rho.partition_point(|&r| r < x);
                    if i == 0 {
                        values[0]
                    } else if i == rho.len() {
                        values[rho.len() - 1]
                    } else {
                        let w = (x - rho[i - 1]) / (rho[i] - rho[i - 1]);
                        values[i - 1] + w * (values[i] - values[i - 1])
                    }
                })
            }
            InitialData::Barrier { barrier, scale } => {
                let built = barrier.build(tree, f)?;
                grid.centers()
                    .iter()
                    .map(|&x| built.profile.eval(x).map(|v| scale * v))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfRange(format!(
                "initial value {v} outside [0, 1]"
            )));
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::{make_grid_half_line, BoundaryCondition};
    use crate::reaction::logistic;

    #[test]
    fn sampling() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let f = logistic(0.05).unwrap();
        let g = make_grid_half_line(&t, 3, 4, BoundaryCondition::Dirichlet0).unwrap();
        let u = InitialData::Indicator {
            radius: 1.0,
            amplitude: 0.1,
        }
        .sample(&g, &t, &f)
        .unwrap();
        assert_eq!(u.iter().filter(|&&v| v == 0.1).count(), 4);
        let bad = InitialData::Constant { value: 1.5 };
        assert!(bad.sample(&g, &t, &f).is_err());
        let s = InitialData::Samples {
            rho: vec![0.0, 3.0],
            values: vec![1.0, 0.0],
        }
        .sample(&g, &t, &f)
        .unwrap();
        assert!((s[0] - (1.0 - g.centers()[0] / 3.0)).abs() < 1e-15);
        let j = r#"{"kind":"barrier","barrier":{"kind":"g","lambda":0.08}}"#;
        let b: InitialData = serde_json::from_str(j).unwrap();
        let v = b.sample(&g, &t, &f).unwrap();
        assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
    }
}
