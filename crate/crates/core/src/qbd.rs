//! Level-independent QBD generators with a structured boundary level.
//!
//! Both platform models share the same shape: level 0 is itself a block
//! tridiagonal chain of sub-levels, its last sub-level couples to level 1,
//! and from level 1 on the blocks repeat:
//!
//! ```text
//!     | L0      U*                |
//!     | D*      local   up        |
//! Q = |         down    local  up |
//!     |                 ...       |
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::linalg::{BlockTridiagonal, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Platform observed at matching completion.
    One,
    /// Platform observed at matching start; matching and service form one
    /// generalized Erlang service time.
    Two,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::One => "one",
            Model::Two => "two",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = QbdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" => Ok(Model::One),
            "two" | "2" => Ok(Model::Two),
            other => Err(QbdError::InvalidParams(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Qbd {
    /// Level 0, as a chain of sub-levels.
    pub boundary: BlockTridiagonal,
    /// Last boundary sub-level to level 1.
    pub boundary_up: DenseMatrix,
    /// Level 1 to the last boundary sub-level.
    pub boundary_down: DenseMatrix,
    /// Level k to k-1, k >= 2.
    pub down: DenseMatrix,
    /// Within a level k >= 1.
    pub local: DenseMatrix,
    /// Level k to k+1, k >= 1.
    pub up: DenseMatrix,
}

impl Qbd {
    pub fn new(
        boundary: BlockTridiagonal,
        boundary_up: DenseMatrix,
        boundary_down: DenseMatrix,
        down: DenseMatrix,
        local: DenseMatrix,
        up: DenseMatrix,
    ) -> Result<Self> {
        let m = local.rows();
        let last = *boundary.level_sizes().last().expect("non-empty boundary");
        let ok = local.is_square()
            && (down.rows(), down.cols()) == (m, m)
            && (up.rows(), up.cols()) == (m, m)
            && (boundary_up.rows(), boundary_up.cols()) == (last, m)
            && (boundary_down.rows(), boundary_down.cols()) == (m, last);
        if !ok {
            return Err(QbdError::Dimension("inconsistent QBD block shapes".into()));
        }
        Ok(Self {
            boundary,
            boundary_up,
            boundary_down,
            down,
            local,
            up,
        })
    }

    pub fn level0_size(&self) -> usize {
        self.boundary.dim()
    }

    /// Number of phases in each repeating level.
    pub fn phases(&self) -> usize {
        self.local.rows()
    }

    /// Order of the reflecting truncation with `levels` repeating levels.
    pub fn truncated_order(&self, levels: usize) -> usize {
        self.level0_size() + levels * self.phases()
    }

    /// Generator restricted to level 0 and levels `1..=levels`. The upward
    /// rates of the last level are folded back into its diagonal, so every
    /// row still sums to zero.
    pub fn assemble_truncated(&self, levels: usize) -> Result<DenseMatrix> {
        if levels < 1 {
            return Err(QbdError::InvalidParams("truncation needs at least one level".into()));
        }
        let m = self.phases();
        let n0 = self.level0_size();
        let mut q = DenseMatrix::zeros(n0 + levels * m, n0 + levels * m);
        q.set_block(0, 0, &self.boundary.to_dense());
        let last_sub = n0 - self.boundary_up.rows();
        q.set_block(last_sub, n0, &self.boundary_up);
        q.set_block(n0, last_sub, &self.boundary_down);
        let up_out = self.up.row_sums();
        for k in 0..levels {
            let off = n0 + k * m;
            let mut local = self.local.clone();
            if k + 1 == levels {
                for (i, r) in up_out.iter().enumerate() {
                    local[(i, i)] += r;
                }
            } else {
                q.set_block(off, off + m, &self.up);
            }
            q.set_block(off, off, &local);
            if k > 0 {
                q.set_block(off, off - m, &self.down);
            }
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_parsing() {
        assert_eq!("one".parse::<Model>().unwrap(), Model::One);
        assert_eq!("2".parse::<Model>().unwrap(), Model::Two);
        assert!("three".parse::<Model>().is_err());
    }
}
