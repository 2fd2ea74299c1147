//! Case-file reader for the native JSON schema and a MATPOWER-style subset
//! (`mpc.baseMVA`, `mpc.bus`, `mpc.branch`).

use crate::grid::{Branch, BusId, GridError, GridGraph, GridKind};
use crate::linalg::C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CaseError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("branch endpoint {0} is not a declared bus")]
    DanglingBranch(BusId),
    #[error("bus {0} is declared twice")]
    DuplicateBus(BusId),
    #[error("in-service branches are not radial: {0}")]
    NotRadial(String),
    #[error("transmission graph is disconnected")]
    Disconnected,
    #[error("a distribution graph needs a root bus")]
    MissingRoot,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: BusId,
    /// MATPOWER bus type: 1 = PQ, 2 = PV, 3 = reference.
    #[serde(rename = "type", default = "default_bus_type")]
    pub bus_type: u8,
    /// Active demand, MW.
    #[serde(default)]
    pub pd: f64,
    /// Reactive demand, MVAr.
    #[serde(default)]
    pub qd: f64,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

fn default_bus_type() -> u8 {
    1
}

impl BusRecord {
    pub fn new(id: BusId, bus_type: u8, pd: f64, qd: f64) -> Self {
        Self {
            id,
            bus_type,
            pd,
            qd,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from: BusId,
    pub to: BusId,
    /// Series resistance, p.u.
    pub r: f64,
    /// Series reactance, p.u.
    pub x: f64,
    #[serde(default = "default_status")]
    pub status: u8,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

fn default_status() -> u8 {
    1
}

impl BranchRecord {
    pub fn new(from: BusId, to: BusId, r: f64, x: f64, status: u8) -> Self {
        Self {
            from,
            to,
            r,
            x,
            status,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
    /// Fields that were present in the input but not understood.
    #[serde(skip)]
    pub warnings: Vec<String>,
    #[serde(flatten, skip_serializing)]
    extra: BTreeMap<String, Value>,
}

impl CaseFile {
    pub fn new(name: &str, base_mva: f64, buses: Vec<BusRecord>, branches: Vec<BranchRecord>) -> Self {
        Self {
            name: name.to_string(),
            base_mva,
            buses,
            branches,
            warnings: Vec::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), CaseError> {
        let mut ids = HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id) {
                return Err(CaseError::DuplicateBus(b.id));
            }
        }
        for br in &self.branches {
            for end in [br.from, br.to] {
                if !ids.contains(&end) {
                    return Err(CaseError::DanglingBranch(end));
                }
            }
        }
        if !(self.base_mva > 0.0) {
            return Err(CaseError::Parse {
                line: 0,
                column: 0,
                message: format!("baseMVA must be positive, got {}", self.base_mva),
            });
        }
        Ok(())
    }

    pub fn reference_bus(&self) -> Option<BusId> {
        self.buses.iter().find(|b| b.bus_type == 3).map(|b| b.id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("case serialization is infallible")
    }
}

/// Parses either the native JSON schema (input starting with `{`) or the
/// MATPOWER subset.
pub fn parse_case(text: &str) -> Result<CaseFile, CaseError> {
    let case = if text.trim_start().starts_with('{') {
        parse_json(text)?
    } else {
        parse_matpower(text)?
    };
    case.validate()?;
    Ok(case)
}

fn parse_json(text: &str) -> Result<CaseFile, CaseError> {
    let mut case: CaseFile = serde_json::from_str(text).map_err(|e| CaseError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut warnings: Vec<String> = case.extra.keys().map(|k| format!("ignored field `{k}`")).collect();
    for b in &case.buses {
        warnings.extend(b.extra.keys().map(|k| format!("ignored bus field `{k}`")));
    }
    for b in &case.branches {
        warnings.extend(b.extra.keys().map(|k| format!("ignored branch field `{k}`")));
    }
    warnings.sort();
    warnings.dedup();
    case.warnings = warnings;
    Ok(case)
}

struct Cursor<'a> {
    lines: Vec<&'a str>,
    line: usize,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_matpower(text: &str) -> Result<CaseFile, CaseError> {
    let mut cur = Cursor {
        lines: text.lines().collect(),
        line: 0,
    };
    let mut name = String::from("case");
    let mut base_mva = None;
    let mut bus_rows = None;
    let mut branch_rows = None;
    let mut warnings = Vec::new();

    while cur.line < cur.lines.len() {
        let raw = cur.lines[cur.line];
        let line = strip_comment(raw).trim();
        let lineno = cur.line + 1;
        cur.line += 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').to_string();
            }
            continue;
        }
        let Some((lhs, rhs)) = line.split_once('=') else {
            return Err(CaseError::Parse {
                line: lineno,
                column: 1,
                message: format!("expected an assignment, found `{line}`"),
            });
        };
        let field = lhs.trim();
        let rhs_col = raw.find('=').map(|i| i + 2).unwrap_or(1);
        let rhs = rhs.trim();
        if rhs.starts_with('[') {
            let rows = read_matrix(&mut cur, rhs, lineno, rhs_col)?;
            match field {
                "mpc.bus" => bus_rows = Some((lineno, rows)),
                "mpc.branch" => branch_rows = Some((lineno, rows)),
                other => warnings.push(format!("ignored field `{other}`")),
            }
        } else {
            match field {
                "mpc.baseMVA" => {
                    let v = rhs.trim_end_matches(';').trim();
                    base_mva = Some(v.parse::<f64>().map_err(|_| CaseError::Parse {
                        line: lineno,
                        column: rhs_col,
                        message: format!("invalid baseMVA `{v}`"),
                    })?);
                }
                other => warnings.push(format!("ignored field `{other}`")),
            }
        }
    }

    let base_mva = base_mva.ok_or_else(|| missing("mpc.baseMVA"))?;
    let (bus_line, bus_rows) = bus_rows.ok_or_else(|| missing("mpc.bus"))?;
    let (branch_line, branch_rows) = branch_rows.ok_or_else(|| missing("mpc.branch"))?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    for (i, row) in bus_rows.iter().enumerate() {
        if row.len() < 4 {
            return Err(short_row(bus_line + i + 1, "bus", 4, row.len()));
        }
        buses.push(BusRecord::new(
            as_id(row[0], bus_line + i + 1)?,
            row[1] as u8,
            row[2],
            row[3],
        ));
    }
    let mut branches = Vec::with_capacity(branch_rows.len());
    for (i, row) in branch_rows.iter().enumerate() {
        if row.len() < 4 {
            return Err(short_row(branch_line + i + 1, "branch", 4, row.len()));
        }
        let status = row.get(10).map(|&s| u8::from(s != 0.0)).unwrap_or(1);
        branches.push(BranchRecord::new(
            as_id(row[0], branch_line + i + 1)?,
            as_id(row[1], branch_line + i + 1)?,
            row[2],
            row[3],
            status,
        ));
    }
    let mut case = CaseFile::new(&name, base_mva, buses, branches);
    case.warnings = warnings;
    Ok(case)
}

fn missing(field: &str) -> CaseError {
    CaseError::Parse {
        line: 0,
        column: 0,
        message: format!("missing `{field}`"),
    }
}

fn short_row(line: usize, what: &str, need: usize, got: usize) -> CaseError {
    CaseError::Parse {
        line,
        column: 1,
        message: format!("{what} row needs at least {need} columns, found {got}"),
    }
}

fn as_id(v: f64, line: usize) -> Result<BusId, CaseError> {
    if v < 0.0 || v.fract() != 0.0 || v > BusId::MAX as f64 {
        return Err(CaseError::Parse {
            line,
            column: 1,
            message: format!("invalid bus id {v}"),
        });
    }
    Ok(v as BusId)
}

/// Reads `[ r11 r12 ...; r21 ... ];` possibly spanning several lines.
fn read_matrix(
    cur: &mut Cursor<'_>,
    first: &str,
    first_line: usize,
    first_col: usize,
) -> Result<Vec<Vec<f64>>, CaseError> {
    let mut rows = Vec::new();
    let mut row: Vec<f64> = Vec::new();
    let mut text = first.trim_start_matches('[').to_string();
    let mut lineno = first_line;
    let mut col_base = first_col;
    loop {
        let (body, done) = match text.find(']') {
            Some(i) => (text[..i].to_string(), true),
            None => (text.clone(), false),
        };
        for (seg_i, segment) in body.split(';').enumerate() {
            if seg_i > 0 && !row.is_empty() {
                rows.push(std::mem::take(&mut row));
            }
            for tok in segment.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                let v = tok.parse::<f64>().map_err(|_| CaseError::Parse {
                    line: lineno,
                    column: col_base + body.find(tok).unwrap_or(0),
                    message: format!("invalid number `{tok}`"),
                })?;
                row.push(v);
            }
        }
        // A line break also terminates a row.
        if !row.is_empty() {
            rows.push(std::mem::take(&mut row));
        }
        if done {
            return Ok(rows);
        }
        if cur.line >= cur.lines.len() {
            return Err(CaseError::Parse {
                line: lineno,
                column: 1,
                message: "unterminated matrix".into(),
            });
        }
        text = strip_comment(cur.lines[cur.line]).to_string();
        cur.line += 1;
        lineno = cur.line;
        col_base = 1;
    }
}

/// Builds a grid graph with `z = r + jx`. In-service parallel branches are
/// merged into one equivalent impedance; out-of-service branches stay in the
/// record with `in_service = false`.
pub fn to_grid_graph(
    case: &CaseFile,
    kind: GridKind,
    root: Option<BusId>,
) -> Result<GridGraph, CaseError> {
    case.validate()?;
    let root = match (kind, root) {
        (_, Some(r)) => Some(r),
        (GridKind::Distribution, None) => return Err(CaseError::MissingRoot),
        (GridKind::Transmission, None) => case.reference_bus().or(case.buses.first().map(|b| b.id)),
    };
    let bus_ids: Vec<BusId> = case.buses.iter().map(|b| b.id).collect();
    let nominal_load = case
        .buses
        .iter()
        .map(|b| C64::new(b.pd, b.qd) / case.base_mva)
        .collect();

    let mut branches: Vec<Branch> = Vec::with_capacity(case.branches.len());
    let mut live: HashMap<(BusId, BusId), usize> = HashMap::new();
    for br in &case.branches {
        let z = C64::new(br.r, br.x);
        if br.status == 0 {
            branches.push(Branch {
                from: br.from,
                to: br.to,
                impedance: z,
                in_service: false,
            });
            continue;
        }
        let key = (br.from.min(br.to), br.from.max(br.to));
        match live.get(&key) {
            Some(&i) => {
                let z0 = branches[i].impedance;
                branches[i].impedance = z0 * z / (z0 + z);
            }
            None => {
                live.insert(key, branches.len());
                branches.push(Branch::new(br.from, br.to, z));
            }
        }
    }

    GridGraph::new(bus_ids, nominal_load, branches, root, kind).map_err(|e| match e {
        GridError::NotRadial { .. } => CaseError::NotRadial(e.to_string()),
        GridError::Disconnected => CaseError::Disconnected,
        GridError::MissingRoot => CaseError::MissingRoot,
        other => CaseError::Grid(other),
    })
}

/// Case files shipped with the crate.
pub fn bundled_case(name: &str) -> Option<&'static str> {
    Some(match name {
        "ieee33" => include_str!("../../data/ieee33.m"),
        "ieee69" => include_str!("../../data/ieee69.m"),
        "ieee30" => include_str!("../../data/ieee30.m"),
        "ieee39" => include_str!("../../data/ieee39.m"),
        "ieee57" => include_str!("../../data/ieee57.m"),
        _ => return None,
    })
}

pub const BUNDLED_CASES: [&str; 5] = ["ieee33", "ieee69", "ieee30", "ieee39", "ieee57"];

/// Natural graph kind of a bundled case.
pub fn bundled_kind(name: &str) -> GridKind {
    match name {
        "ieee33" | "ieee69" => GridKind::Distribution,
        _ => GridKind::Transmission,
    }
}

/// Loads a bundled case by name, or a case file from disk.
pub fn load_case(name_or_path: &str) -> Result<CaseFile, CaseError> {
    let text = match bundled_case(name_or_path) {
        Some(t) => t.to_string(),
        None => std::fs::read_to_string(name_or_path).map_err(|e| CaseError::Parse {
            line: 0,
            column: 0,
            message: format!("cannot read {name_or_path}: {e}"),
        })?,
    };
    let mut case = parse_case(&text)?;
    if bundled_case(name_or_path).is_some() {
        case.name = name_or_path.to_string();
    }
    Ok(case)
}

/// Loads a bundled case and converts it with its natural kind and root.
pub fn bundled_graph(name: &str) -> Result<GridGraph, CaseError> {
    let case = load_case(name)?;
    let kind = bundled_kind(name);
    let root = case.reference_bus().or(case.buses.first().map(|b| b.id));
    to_grid_graph(&case, kind, root)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BUS: &str = "
function mpc = twobus
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0;
    2 1 10 5;
];
mpc.gen = [ 1 0 0 ];
mpc.branch = [
    1 2 0 1 0 0 0 0 0 0 1;
];
";

    #[test]
    fn minimal_two_bus_case() {
        let case = parse_case(TWO_BUS).unwrap();
        assert_eq!(case.name, "twobus");
        assert_eq!(case.buses.len(), 2);
        assert_eq!(case.branches.len(), 1);
        assert_eq!(case.branches[0].x, 1.0);
        assert_eq!(case.warnings, vec!["ignored field `mpc.gen`".to_string()]);
        let g = to_grid_graph(&case, GridKind::Distribution, Some(1)).unwrap();
        assert_eq!(g.n(), 2);
        assert!(g.is_rooted_tree());
        assert_eq!(g.nominal_load[1], C64::new(0.1, 0.05));
    }

    #[test]
    fn dangling_branch() {
        let text = TWO_BUS.replace("1 2 0 1 0", "1 99 0 1 0");
        assert_eq!(parse_case(&text), Err(CaseError::DanglingBranch(99)));
    }

    #[test]
    fn parse_error_has_position() {
        let text = TWO_BUS.replace("2 1 10 5;", "2 1 ten 5;");
        match parse_case(&text) {
            Err(CaseError::Parse { line, column, .. }) => {
                assert_eq!(line, 6);
                assert!(column > 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ieee33_shape() {
        let case = load_case("ieee33").unwrap();
        assert_eq!(case.buses.len(), 33);
        assert_eq!(case.branches.len(), 32);
        assert!(case.branches.iter().all(|b| b.status == 1));
    }

    #[test]
    fn tie_switch_closed_breaks_radiality() {
        let mut case = load_case("ieee33").unwrap();
        case.branches.push(BranchRecord::new(21, 8, 0.0125, 0.0125, 1));
        assert!(matches!(
            to_grid_graph(&case, GridKind::Distribution, Some(1)),
            Err(CaseError::NotRadial(_))
        ));
    }

    #[test]
    fn open_branches_are_kept() {
        let mut case = load_case("ieee33").unwrap();
        case.branches.push(BranchRecord::new(21, 8, 0.0125, 0.0125, 0));
        let g = to_grid_graph(&case, GridKind::Distribution, Some(1)).unwrap();
        assert_eq!(g.branches.len(), 33);
        assert_eq!(g.branches.iter().filter(|b| !b.in_service).count(), 1);
    }

    #[test]
    fn transmission_cases_accept_cycles() {
        let g = bundled_graph("ieee30").unwrap();
        assert_eq!(g.n(), 30);
        assert!(g.in_service().count() >= g.n());
        assert!(g.is_connected());
        // case57 carries two parallel circuits that get merged.
        let g57 = bundled_graph("ieee57").unwrap();
        assert_eq!(g57.in_service().count(), 78);
    }

    #[test]
    fn disconnected_transmission() {
        let mut case = load_case("ieee30").unwrap();
        case.buses.push(BusRecord::new(99, 1, 0.0, 0.0));
        assert_eq!(
            to_grid_graph(&case, GridKind::Transmission, None),
            Err(CaseError::Disconnected)
        );
    }

    #[test]
    fn json_round_trip_is_idempotent() {
        let case = load_case("ieee33").unwrap();
        let once = parse_case(&case.to_json()).unwrap();
        let twice = parse_case(&once.to_json()).unwrap();
        assert_eq!(once.to_json(), twice.to_json());
        assert_eq!(once.buses, case.buses);
    }

    #[test]
    fn json_unknown_fields_warn() {
        let text = r#"{"name":"t","base_mva":1,"owner":"x",
            "buses":[{"id":1,"type":3},{"id":2,"pd":1,"zone":4}],
            "branches":[{"from":1,"to":2,"r":0,"x":1}]}"#;
        let case = parse_case(text).unwrap();
        assert_eq!(
            case.warnings,
            vec!["ignored bus field `zone`", "ignored field `owner`"]
        );
        assert_eq!(case.branches[0].status, 1);
    }
}
