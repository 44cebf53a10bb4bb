//! JSON file formats and deterministic report output.
//!
//! Complex matrices are nested arrays `[row][col] = [re, im]`. MPS files carry
//! `mats[μ]` with μ ascending from −S to +S.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};

use crate::ed::{BoundaryTerm, Interaction};
use crate::error::{Result, SptError};
use crate::group::FiniteGroup;
use crate::linalg::CMat;
use crate::mps::MpsTensor;
use crate::spin::Spin;

/// Dense complex matrix as `[[ [re, im], … ], …]`.
pub type MatrixData = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_data(m: &CMat) -> MatrixData {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

pub fn matrix_from_data(data: &MatrixData) -> Result<CMat> {
    let rows = data.len();
    let cols = data.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(SptError::Validation("empty matrix".into()));
    }
    if data.iter().any(|row| row.len() != cols) {
        return Err(SptError::Validation("ragged matrix rows".into()));
    }
    if data.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(SptError::Validation("non-finite matrix entry".into()));
    }
    Ok(CMat::from_fn(rows, cols, |r, c| num_complex::Complex64::new(data[r][c][0], data[r][c][1])))
}

/// `#[serde(with = "complex_matrix")]` adapter for [`CMat`] fields.
pub mod complex_matrix {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_data(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let data = MatrixData::deserialize(d)?;
        matrix_from_data(&data).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MpsFile {
    pub spin_S: f64,
    pub bond_dim: usize,
    pub mats: Vec<MatrixData>,
}

impl MpsFile {
    pub fn from_tensor(v: &MpsTensor) -> Self {
        MpsFile { spin_S: v.spin().value(), bond_dim: v.bond_dim(), mats: v.mats().iter().map(matrix_to_data).collect() }
    }

    pub fn to_tensor(&self) -> Result<MpsTensor> {
        let spin = Spin::from_f64(self.spin_S)?;
        if self.mats.len() != spin.dim() {
            return Err(SptError::Validation(format!(
                "spin {spin} needs {} matrices, file has {}",
                spin.dim(),
                self.mats.len()
            )));
        }
        let mats = self.mats.iter().map(matrix_from_data).collect::<Result<Vec<_>>>()?;
        if mats.iter().any(|m| m.nrows() != self.bond_dim || m.ncols() != self.bond_dim) {
            return Err(SptError::Validation(format!("matrices are not {0}×{0}", self.bond_dim)));
        }
        MpsTensor::new(spin, mats)
    }
}

pub fn parse_mps(text: &str) -> Result<MpsTensor> {
    let file: MpsFile = serde_json::from_str(text).map_err(|e| SptError::Validation(format!("MPS file: {e}")))?;
    file.to_tensor()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    pub elements: Vec<String>,
    pub mult_table: Vec<Vec<usize>>,
    pub rep: BTreeMap<String, MatrixData>,
}

impl GroupFile {
    /// The group and its representation matrices ordered like `elements`.
    pub fn resolve(&self) -> Result<(FiniteGroup, Vec<CMat>)> {
        let group = FiniteGroup::new(self.elements.clone(), self.mult_table.clone())?;
        if let Some(extra) = self.rep.keys().find(|k| group.index_of(k).is_none()) {
            return Err(SptError::Validation(format!("rep names unknown element `{extra}`")));
        }
        let rep = self
            .elements
            .iter()
            .map(|name| {
                let data = self
                    .rep
                    .get(name)
                    .ok_or_else(|| SptError::Validation(format!("rep is missing element `{name}`")))?;
                matrix_from_data(data)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((group, rep))
    }
}

pub fn parse_group(text: &str) -> Result<(FiniteGroup, Vec<CMat>)> {
    let file: GroupFile = serde_json::from_str(text).map_err(|e| SptError::Validation(format!("group file: {e}")))?;
    file.resolve()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryTermFile {
    pub sites: Vec<i64>,
    pub matrix: MatrixData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct InteractionFile {
    pub spin_S: f64,
    pub range: usize,
    pub bulk: MatrixData,
    #[serde(default)]
    pub boundary: Vec<BoundaryTermFile>,
}

impl InteractionFile {
    pub fn from_interaction(phi: &Interaction) -> Self {
        InteractionFile {
            spin_S: phi.spin().value(),
            range: phi.range(),
            bulk: matrix_to_data(phi.bulk()),
            boundary: phi
                .boundary()
                .iter()
                .map(|t| BoundaryTermFile { sites: t.sites.clone(), matrix: matrix_to_data(&t.matrix) })
                .collect(),
        }
    }

    pub fn to_interaction(&self) -> Result<Interaction> {
        let spin = Spin::from_f64(self.spin_S)?;
        let boundary = self
            .boundary
            .iter()
            .map(|t| Ok(BoundaryTerm { sites: t.sites.clone(), matrix: matrix_from_data(&t.matrix)? }))
            .collect::<Result<Vec<_>>>()?;
        let phi = Interaction::new(spin, matrix_from_data(&self.bulk)?, boundary)?;
        if phi.range() != self.range {
            return Err(SptError::Validation(format!("bulk term spans {} sites, file says {}", phi.range(), self.range)));
        }
        Ok(phi)
    }
}

pub fn parse_interaction(text: &str) -> Result<Interaction> {
    let file: InteractionFile =
        serde_json::from_str(text).map_err(|e| SptError::Validation(format!("interaction file: {e}")))?;
    file.to_interaction()
}

/// Writes every float in scientific notation with 17 significant digits.
struct CanonicalFormatter;

impl serde_json::ser::Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Byte-stable JSON: object keys sorted, floats at fixed precision.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // Value's map type is ordered by key when serde_json is built without
    // `preserve_order`.
    let tree = serde_json::to_value(value).map_err(|e| SptError::Validation(format!("serialize: {e}")))?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter);
    tree.serialize(&mut ser).map_err(|e| SptError::Validation(format!("serialize: {e}")))?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn mps_round_trip() {
        let v = MpsTensor::aklt();
        let text = serde_json::to_string(&MpsFile::from_tensor(&v)).unwrap();
        let back = parse_mps(&text).unwrap();
        for (a, b) in v.mats().iter().zip(back.mats()) {
            assert_eq!(max_abs(&(a - b)), 0.0);
        }
    }

    #[test]
    fn rejects_ragged_and_mismatched() {
        let ragged = r#"{"spin_S": 0.5, "bond_dim": 1, "mats": [[[[1,0]]], [[[1,0],[0,0]]]]}"#;
        assert!(matches!(parse_mps(ragged), Err(SptError::Validation(_))));
        let short = r#"{"spin_S": 1, "bond_dim": 1, "mats": [[[[1,0]]]]}"#;
        assert!(parse_mps(short).is_err());
        let wrong_k = r#"{"spin_S": 0, "bond_dim": 2, "mats": [[[[1,0]]]]}"#;
        assert!(parse_mps(wrong_k).is_err());
        assert!(parse_mps("{").is_err());
    }

    #[test]
    fn group_file_resolution() {
        let text = r#"{"elements": ["e", "a"], "mult_table": [[0, 1], [1, 0]],
            "rep": {"e": [[[1,0]]], "a": [[[-1,0]]]}}"#;
        let (g, rep) = parse_group(text).unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(rep[1][(0, 0)].re, -1.0);
        let missing = r#"{"elements": ["e", "a"], "mult_table": [[0, 1], [1, 0]], "rep": {"e": [[[1,0]]]}}"#;
        assert!(parse_group(missing).is_err());
        let bad_table = r#"{"elements": ["e", "a"], "mult_table": [[0, 1], [1, 1]], "rep": {"e": [[[1,0]]], "a": [[[1,0]]]}}"#;
        assert!(parse_group(bad_table).is_err());
    }

    #[test]
    fn interaction_round_trip() {
        let phi = Interaction::builtin(crate::ed::Builtin::Aklt);
        let text = to_canonical_json(&InteractionFile::from_interaction(&phi)).unwrap();
        assert_eq!(parse_interaction(&text).unwrap(), phi);
        let wrong_range = text.replace(r#""range":2"#, r#""range":3"#);
        assert!(parse_interaction(&wrong_range).is_err());
        let with_edge = r#"{"spin_S": 0.5, "range": 1, "bulk": [[[1,0],[0,0]],[[0,0],[-1,0]]],
            "boundary": [{"sites": [-1], "matrix": [[[0,0],[1,0]],[[1,0],[0,0]]]}]}"#;
        assert_eq!(parse_interaction(with_edge).unwrap().boundary()[0].sites, vec![-1]);
    }

    #[test]
    fn canonical_output_is_sorted_and_fixed_precision() {
        #[derive(Serialize)]
        struct R {
            zeta: i32,
            alpha: f64,
        }
        let s = to_canonical_json(&R { zeta: -1, alpha: 0.1 }).unwrap();
        assert_eq!(s, r#"{"alpha":1.0000000000000001e-1,"zeta":-1}"#);
    }
}
