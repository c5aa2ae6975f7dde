//! JSON instance files.
//!
//! ```json
//! {
//!   "weights": [0.25, 0.25, 0.25, 0.25],
//!   "blocks": [[0, 1], [2, 3]],
//!   "u": [[1, 0], [2, 0], [1, 0], [1, 0]],
//!   "w": [[2, 0], [0, 0], [1, 0], [1, 0]],
//!   "operators": { "S": [[[1, 0], [0, 0], ...], ...] },
//!   "rank_one": { "x": [...], "y": [...] }
//! }
//! ```
//!
//! Complex numbers are `[re, im]`, atoms are zero-indexed and operator
//! matrices are row-major lists of rows.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::condexp::Partition;
use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, LinOperator, MFunction, MeasureSpace, C64};
use crate::wce::{wce_build, WceOp};

pub type Complex = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankOnePair {
    pub x: Vec<Complex>,
    pub y: Vec<Complex>,
}

/// On-disk form. Field order and `BTreeMap` keys make serialization canonical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub weights: Vec<f64>,
    pub blocks: Vec<Vec<usize>>,
    pub u: Vec<Complex>,
    pub w: Vec<Complex>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub operators: BTreeMap<String, Vec<Vec<Complex>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_one: Option<RankOnePair>,
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub partition: Partition,
    pub u: MFunction,
    pub w: MFunction,
    pub operators: BTreeMap<String, LinOperator>,
    pub rank_one: Option<(MFunction, MFunction)>,
}

fn to_c64(z: &Complex) -> C64 {
    C64::new(z[0], z[1])
}

fn from_c64(z: C64) -> Complex {
    [z.re, z.im]
}

fn function(space: &Arc<MeasureSpace>, field: &str, vals: &[Complex]) -> Result<MFunction> {
    if vals.len() != space.dim() {
        return Err(Error::validation(
            field,
            format!("has {} values but the space has {} atoms", vals.len(), space.dim()),
        ));
    }
    if let Some(i) = vals.iter().position(|z| !(z[0].is_finite() && z[1].is_finite())) {
        return Err(Error::validation(format!("{field}[{i}]"), "values must be finite"));
    }
    MFunction::new(space, vals.iter().map(to_c64).collect())
}

impl InstanceFile {
    pub fn validate(&self) -> Result<Instance> {
        if let Some(i) = self.weights.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::validation(format!("weights[{i}]"), "weights must be positive"));
        }
        let space = MeasureSpace::new(self.weights.clone())?;
        let partition = Partition::new(&space, self.blocks.clone())?;
        let u = function(&space, "u", &self.u)?;
        let w = function(&space, "w", &self.w)?;
        let n = space.dim();
        let mut operators = BTreeMap::new();
        for (name, rows) in &self.operators {
            let field = format!("operators.{name}");
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::validation(&field, format!("must be a {n}x{n} matrix")));
            }
            if rows.iter().flatten().any(|z| !(z[0].is_finite() && z[1].is_finite())) {
                return Err(Error::validation(&field, "entries must be finite"));
            }
            let mat = CMatrix::from_fn(n, n, |i, j| to_c64(&rows[i][j]));
            operators.insert(name.clone(), LinOperator::new(&space, mat)?);
        }
        let rank_one = match &self.rank_one {
            Some(p) => Some((
                function(&space, "rank_one.x", &p.x)?,
                function(&space, "rank_one.y", &p.y)?,
            )),
            None => None,
        };
        Ok(Instance {
            partition,
            u,
            w,
            operators,
            rank_one,
        })
    }
}

impl Instance {
    pub fn new(partition: Partition, u: MFunction, w: MFunction) -> Self {
        Instance {
            partition,
            u,
            w,
            operators: BTreeMap::new(),
            rank_one: None,
        }
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        self.partition.space()
    }

    pub fn wce(&self) -> WceOp {
        wce_build(&self.partition, &self.u, &self.w).expect("validated instance")
    }

    /// Named operator, with `T` standing for the WCE operator itself.
    pub fn operator(&self, name: &str) -> Result<LinOperator> {
        if let Some(op) = self.operators.get(name) {
            return Ok(op.clone());
        }
        match name {
            "T" => Ok(self.wce().matrix().clone()),
            "I" => Ok(LinOperator::identity(self.space())),
            _ => Err(Error::Usage(format!(
                "unknown operator '{name}' (file defines: {})",
                self.operators.keys().cloned().collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn to_file(&self) -> InstanceFile {
        let vals = |f: &MFunction| f.values().iter().map(|&z| from_c64(z)).collect();
        InstanceFile {
            weights: self.space().weights().to_vec(),
            blocks: self.partition.blocks().to_vec(),
            u: vals(&self.u),
            w: vals(&self.w),
            operators: self
                .operators
                .iter()
                .map(|(k, op)| {
                    let m = op.matrix();
                    let rows = (0..m.nrows())
                        .map(|i| (0..m.ncols()).map(|j| from_c64(m[(i, j)])).collect())
                        .collect();
                    (k.clone(), rows)
                })
                .collect(),
            rank_one: self.rank_one.as_ref().map(|(x, y)| RankOnePair {
                x: vals(x),
                y: vals(y),
            }),
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        digest_file(&self.to_file())
    }
}

pub fn digest_file(file: &InstanceFile) -> String {
    let json = serde_json::to_string(file).expect("instance files serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

pub fn parse_instance(text: &str, origin: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{origin}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    file.validate()
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        location: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_instance(&text, &path.display().to_string())
}
