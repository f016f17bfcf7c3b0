//! Benchmark file formats. Two text formats are supported alongside
//! plain JSON serialization of the instance types; the byte-level
//! layouts are documented in `docs/formats.md` at the repository root.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point;

use super::types::{Customer, CvrpInstance, MdvrpInstance};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

struct Lines<'a> {
    path: &'a Path,
    tokens: Vec<(usize, Vec<&'a str>)>,
    cursor: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        let tokens = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        Lines {
            path,
            tokens,
            cursor: 0,
        }
    }

    fn next(&mut self) -> Result<(usize, &[&'a str])> {
        let item = self
            .tokens
            .get(self.cursor)
            .ok_or_else(|| parse_err(self.path, self.cursor + 1, "unexpected end of file"))?;
        self.cursor += 1;
        Ok((item.0, &item.1))
    }
}

fn field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    tokens: &[&str],
    idx: usize,
    name: &str,
) -> Result<T> {
    let raw = tokens
        .get(idx)
        .ok_or_else(|| parse_err(path, line, format!("missing field '{name}'")))?;
    raw.parse::<T>()
        .map_err(|_| parse_err(path, line, format!("field '{name}' has invalid value '{raw}'")))
}

/// Parse a classic multi-depot text instance.
///
/// Layout: a header `type m n t` (type 2, `m` vehicles per depot, `n`
/// customers, `t` depots); `t` lines `D Q` (route-duration limit and
/// vehicle capacity); `n` customer lines `i x y service q ...`; and `t`
/// depot lines `i x y ...`. Duration limits and heterogeneous
/// capacities are rejected.
pub fn parse_cordeau(path: impl AsRef<Path>) -> Result<MdvrpInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = Lines::new(path, &text);

    let (ln, head) = lines.next()?;
    let kind: i64 = field(path, ln, head, 0, "problem type")?;
    if kind != 2 {
        return Err(parse_err(path, ln, format!("expected problem type 2, found {kind}")));
    }
    let m: u32 = field(path, ln, head, 1, "vehicles per depot")?;
    let n: usize = field(path, ln, head, 2, "customer count")?;
    let t: usize = field(path, ln, head, 3, "depot count")?;

    let mut capacity = None;
    for _ in 0..t {
        let (ln, toks) = lines.next()?;
        let duration: f64 = field(path, ln, toks, 0, "route duration limit")?;
        let q: u32 = field(path, ln, toks, 1, "vehicle capacity")?;
        if duration != 0.0 {
            return Err(parse_err(path, ln, "route-duration limits are not supported"));
        }
        match capacity {
            None => capacity = Some(q),
            Some(prev) if prev == q => {}
            Some(prev) => {
                return Err(parse_err(
                    path,
                    ln,
                    format!("heterogeneous capacities {prev} and {q} are not supported"),
                ))
            }
        }
    }
    let capacity = capacity.ok_or_else(|| parse_err(path, 1, "no depot capacity lines"))?;

    let mut customers = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, toks) = lines.next()?;
        let x: f64 = field(path, ln, toks, 1, "x")?;
        let y: f64 = field(path, ln, toks, 2, "y")?;
        let q: u32 = field(path, ln, toks, 4, "demand")?;
        customers.push(Customer {
            pos: Point::new(x, y),
            demand: q,
        });
    }

    let mut depots = Vec::with_capacity(t);
    for _ in 0..t {
        let (ln, toks) = lines.next()?;
        let x: f64 = field(path, ln, toks, 1, "x")?;
        let y: f64 = field(path, ln, toks, 2, "y")?;
        depots.push(Point::new(x, y));
    }

    MdvrpInstance::new(depots, customers, vec![m; t], capacity)
}

/// Write an instance in the classic multi-depot text layout. Requires
/// a uniform vehicle count per depot (the format cannot express more).
pub fn write_cordeau(inst: &MdvrpInstance, path: impl AsRef<Path>) -> Result<()> {
    let m = inst.vehicles_per_depot[0];
    if inst.vehicles_per_depot.iter().any(|&v| v != m) {
        return Err(Error::Config(
            "text format requires a uniform vehicle count per depot".into(),
        ));
    }
    let mut out = String::new();
    writeln!(out, "2 {} {} {}", m, inst.n(), inst.num_depots()).unwrap();
    for _ in 0..inst.num_depots() {
        writeln!(out, "0 {}", inst.capacity).unwrap();
    }
    for (i, c) in inst.customers.iter().enumerate() {
        writeln!(out, "{} {} {} 0 {} 1 1 1", i + 1, c.pos.x, c.pos.y, c.demand).unwrap();
    }
    for (i, d) in inst.depots.iter().enumerate() {
        writeln!(out, "{} {} {} 0 0", inst.n() + i + 1, d.x, d.y).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parse a TSPLIB-style single-depot instance (EUC_2D coordinates, a
/// demand section, and a depot section naming exactly one depot).
/// Distances stay full double precision; the classic integer rounding
/// convention is deliberately not applied.
pub fn parse_tsplib_cvrp(path: impl AsRef<Path>) -> Result<CvrpInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;

    let mut dimension: Option<usize> = None;
    let mut capacity: Option<u32> = None;
    let mut vehicles: Option<u32> = None;
    let mut coords: Vec<(usize, Point)> = Vec::new();
    let mut demands: Vec<(usize, u32)> = Vec::new();
    let mut depot_ids: Vec<usize> = Vec::new();

    #[derive(PartialEq)]
    enum Section {
        Header,
        Coords,
        Demands,
        Depots,
        Done,
    }
    let mut section = Section::Header;

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if upper.starts_with("NODE_COORD_SECTION") {
            section = Section::Coords;
            continue;
        }
        if upper.starts_with("DEMAND_SECTION") {
            section = Section::Demands;
            continue;
        }
        if upper.starts_with("DEPOT_SECTION") {
            section = Section::Depots;
            continue;
        }
        if upper == "EOF" {
            section = Section::Done;
            continue;
        }
        match section {
            Section::Header => {
                if let Some((key, value)) = line.split_once(':') {
                    let key = key.trim().to_ascii_uppercase();
                    let value = value.trim();
                    match key.as_str() {
                        "DIMENSION" => {
                            dimension = Some(value.parse().map_err(|_| {
                                parse_err(path, ln, "invalid DIMENSION value")
                            })?)
                        }
                        "CAPACITY" => {
                            capacity = Some(value.parse().map_err(|_| {
                                parse_err(path, ln, "invalid CAPACITY value")
                            })?)
                        }
                        "VEHICLES" => {
                            vehicles = Some(value.parse().map_err(|_| {
                                parse_err(path, ln, "invalid VEHICLES value")
                            })?)
                        }
                        "EDGE_WEIGHT_TYPE" => {
                            if value != "EUC_2D" {
                                return Err(parse_err(
                                    path,
                                    ln,
                                    format!("unsupported edge weight type '{value}'"),
                                ));
                            }
                        }
                        _ => {}
                    }
                }
            }
            Section::Coords => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let id: usize = field(path, ln, &toks, 0, "node id")?;
                let x: f64 = field(path, ln, &toks, 1, "x")?;
                let y: f64 = field(path, ln, &toks, 2, "y")?;
                coords.push((id, Point::new(x, y)));
            }
            Section::Demands => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                let id: usize = field(path, ln, &toks, 0, "node id")?;
                let q: u32 = field(path, ln, &toks, 1, "demand")?;
                demands.push((id, q));
            }
            Section::Depots => {
                let id: i64 = line
                    .parse()
                    .map_err(|_| parse_err(path, ln, "invalid depot id"))?;
                if id != -1 {
                    depot_ids.push(id as usize);
                }
            }
            Section::Done => {}
        }
    }

    let dim = dimension.ok_or_else(|| parse_err(path, 1, "missing DIMENSION"))?;
    let capacity = capacity.ok_or_else(|| parse_err(path, 1, "missing CAPACITY"))?;
    if coords.len() != dim {
        return Err(parse_err(
            path,
            1,
            format!("expected {dim} coordinates, found {}", coords.len()),
        ));
    }
    if demands.len() != dim {
        return Err(parse_err(
            path,
            1,
            format!("expected {dim} demands, found {}", demands.len()),
        ));
    }
    if depot_ids.len() != 1 {
        return Err(parse_err(path, 1, "expected exactly one depot"));
    }
    let depot_id = depot_ids[0];

    let mut points = vec![None; dim];
    for (id, p) in coords {
        if id == 0 || id > dim {
            return Err(parse_err(path, 1, format!("node id {id} out of range")));
        }
        points[id - 1] = Some(p);
    }
    let mut qs = vec![None; dim];
    for (id, q) in demands {
        if id == 0 || id > dim {
            return Err(parse_err(path, 1, format!("node id {id} out of range")));
        }
        qs[id - 1] = Some(q);
    }
    let mut depot = None;
    let mut customers = Vec::with_capacity(dim - 1);
    for id in 1..=dim {
        let p = points[id - 1].ok_or_else(|| parse_err(path, 1, format!("missing node {id}")))?;
        let q = qs[id - 1].ok_or_else(|| parse_err(path, 1, format!("missing demand {id}")))?;
        if id == depot_id {
            depot = Some(p);
        } else {
            customers.push(Customer { pos: p, demand: q });
        }
    }
    let depot = depot.ok_or_else(|| parse_err(path, 1, "depot id not among nodes"))?;
    CvrpInstance::new(depot, customers, capacity, vehicles)
}

/// Write a single-depot instance in the TSPLIB-style layout (node 1 is
/// the depot).
pub fn write_tsplib_cvrp(inst: &CvrpInstance, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let name = path
        .as_ref()
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "instance".into());
    writeln!(out, "NAME : {name}").unwrap();
    writeln!(out, "TYPE : CVRP").unwrap();
    writeln!(out, "DIMENSION : {}", inst.n() + 1).unwrap();
    writeln!(out, "EDGE_WEIGHT_TYPE : EUC_2D").unwrap();
    writeln!(out, "CAPACITY : {}", inst.capacity).unwrap();
    if let Some(m) = inst.fleet_limit {
        writeln!(out, "VEHICLES : {m}").unwrap();
    }
    writeln!(out, "NODE_COORD_SECTION").unwrap();
    writeln!(out, "1 {} {}", inst.depot.x, inst.depot.y).unwrap();
    for (i, c) in inst.customers.iter().enumerate() {
        writeln!(out, "{} {} {}", i + 2, c.pos.x, c.pos.y).unwrap();
    }
    writeln!(out, "DEMAND_SECTION").unwrap();
    writeln!(out, "1 0").unwrap();
    for (i, c) in inst.customers.iter().enumerate() {
        writeln!(out, "{} {}", i + 2, c.demand).unwrap();
    }
    writeln!(out, "DEPOT_SECTION").unwrap();
    writeln!(out, "1").unwrap();
    writeln!(out, "-1").unwrap();
    writeln!(out, "EOF").unwrap();
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a single-depot instance, dispatching on the file extension:
/// `.json` uses the canonical JSON serialization, anything else the
/// TSPLIB-style text layout.
pub fn load_cvrp(path: impl AsRef<Path>) -> Result<CvrpInstance> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    } else {
        parse_tsplib_cvrp(path)
    }
}

/// Load a multi-depot instance (`.json` or the classic text layout).
pub fn load_mdvrp(path: impl AsRef<Path>) -> Result<MdvrpInstance> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    } else {
        parse_cordeau(path)
    }
}

/// Write a single-depot instance, dispatching on extension as in
/// [`load_cvrp`].
pub fn write_cvrp(inst: &CvrpInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        std::fs::write(path, serde_json::to_string_pretty(inst)?)?;
        Ok(())
    } else {
        write_tsplib_cvrp(inst, path)
    }
}

/// Write a multi-depot instance, dispatching on extension as in
/// [`load_mdvrp`].
pub fn write_mdvrp(inst: &MdvrpInstance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        std::fs::write(path, serde_json::to_string_pretty(inst)?)?;
        Ok(())
    } else {
        write_cordeau(inst, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::generate::{generate_cvrp, generate_mdvrp};
    use crate::instances::types::InstanceSpec;

    #[test]
    fn cordeau_round_trip() {
        let spec = InstanceSpec {
            customers: 30..=30,
            depots: 3..=3,
            ..InstanceSpec::default()
        };
        let inst = generate_mdvrp(&spec, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.txt");
        write_cordeau(&inst, &path).unwrap();
        let back = parse_cordeau(&path).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn tsplib_round_trip() {
        let spec = InstanceSpec {
            customers: 25..=25,
            ..InstanceSpec::default()
        };
        let mut inst = generate_cvrp(&spec, 9).unwrap();
        inst.fleet_limit = Some(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.vrp");
        write_tsplib_cvrp(&inst, &path).unwrap();
        let back = parse_tsplib_cvrp(&path).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn json_round_trip() {
        let spec = InstanceSpec {
            customers: 12..=12,
            ..InstanceSpec::default()
        };
        let inst = generate_cvrp(&spec, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.json");
        write_cvrp(&inst, &path).unwrap();
        let back = load_cvrp(&path).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.txt");
        std::fs::write(&path, "2 4 50 4\n0 80\n0 80\n").unwrap();
        let err = parse_cordeau(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "error should name a line: {msg}");
    }

    #[test]
    fn duration_limits_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dur.txt");
        std::fs::write(&path, "2 1 1 2\n500 80\n500 80\n1 5 5 0 3 1 1 1\n2 0 0 0 0\n3 9 9 0 0\n")
            .unwrap();
        assert!(parse_cordeau(&path).is_err());
    }
}
