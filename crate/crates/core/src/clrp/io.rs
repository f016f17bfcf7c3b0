//! Sectioned text format for location-routing instances (depot
//! capacities and opening costs included); layout documented in
//! `docs/formats.md`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::instances::types::{ClrpInstance, Customer};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parse a sectioned location-routing instance.
pub fn parse_clrp(path: impl AsRef<Path>) -> Result<ClrpInstance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;

    let mut vehicle_capacity: Option<u32> = None;
    let mut route_cost: Option<f64> = None;
    let mut depots: Vec<(Point, f64, f64)> = Vec::new();
    let mut customers: Vec<Customer> = Vec::new();

    #[derive(PartialEq)]
    enum Section {
        Header,
        Depots,
        Customers,
    }
    let mut section = Section::Header;

    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let upper = line.to_ascii_uppercase();
        if upper == "DEPOT_SECTION" {
            section = Section::Depots;
            continue;
        }
        if upper == "CUSTOMER_SECTION" {
            section = Section::Customers;
            continue;
        }
        if upper == "EOF" {
            break;
        }
        match section {
            Section::Header => {
                if let Some((key, value)) = line.split_once(':') {
                    let value = value.trim();
                    match key.trim().to_ascii_uppercase().as_str() {
                        "VEHICLE_CAPACITY" => {
                            vehicle_capacity = Some(value.parse().map_err(|_| {
                                parse_err(path, ln, "invalid VEHICLE_CAPACITY")
                            })?)
                        }
                        "ROUTE_OPENING_COST" => {
                            route_cost = Some(value.parse().map_err(|_| {
                                parse_err(path, ln, "invalid ROUTE_OPENING_COST")
                            })?)
                        }
                        _ => {}
                    }
                }
            }
            Section::Depots => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 4 {
                    return Err(parse_err(
                        path,
                        ln,
                        "depot line must be 'x y capacity opening_cost'",
                    ));
                }
                let x: f64 = toks[0]
                    .parse()
                    .map_err(|_| parse_err(path, ln, "invalid depot x"))?;
                let y: f64 = toks[1]
                    .parse()
                    .map_err(|_| parse_err(path, ln, "invalid depot y"))?;
                let cap: f64 = if toks[2].eq_ignore_ascii_case("inf") {
                    f64::INFINITY
                } else {
                    toks[2]
                        .parse()
                        .map_err(|_| parse_err(path, ln, "invalid depot capacity"))?
                };
                let cost: f64 = toks[3]
                    .parse()
                    .map_err(|_| parse_err(path, ln, "invalid depot opening cost"))?;
                depots.push((Point::new(x, y), cap, cost));
            }
            Section::Customers => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(parse_err(path, ln, "customer line must be 'x y demand'"));
                }
                let x: f64 = toks[0]
                    .parse()
                    .map_err(|_| parse_err(path, ln, "invalid customer x"))?;
                let y: f64 = toks[1]
                    .parse()
                    .map_err(|_| parse_err(path, ln, "invalid customer y"))?;
                let q: u32 = toks[2]
                    .parse()
                    .map_err(|_| parse_err(path, ln, "invalid demand"))?;
                customers.push(Customer {
                    pos: Point::new(x, y),
                    demand: q,
                });
            }
        }
    }

    let vehicle_capacity =
        vehicle_capacity.ok_or_else(|| parse_err(path, 1, "missing VEHICLE_CAPACITY"))?;
    let route_cost = route_cost.ok_or_else(|| parse_err(path, 1, "missing ROUTE_OPENING_COST"))?;
    if depots.is_empty() {
        return Err(parse_err(path, 1, "missing DEPOT_SECTION"));
    }
    let (points, caps_costs): (Vec<Point>, Vec<(f64, f64)>) = depots
        .into_iter()
        .map(|(p, w, f)| (p, (w, f)))
        .unzip();
    let (caps, costs) = caps_costs.into_iter().unzip();
    ClrpInstance::new(points, customers, vehicle_capacity, caps, costs, route_cost)
}

/// Write an instance in the sectioned layout parsed by [`parse_clrp`].
pub fn write_clrp(inst: &ClrpInstance, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "VEHICLE_CAPACITY : {}", inst.vehicle_capacity).unwrap();
    writeln!(out, "ROUTE_OPENING_COST : {}", inst.route_opening_cost).unwrap();
    writeln!(out, "DEPOT_SECTION").unwrap();
    for (i, d) in inst.depots.iter().enumerate() {
        let cap = inst.depot_capacities[i];
        if cap.is_infinite() {
            writeln!(out, "{} {} inf {}", d.x, d.y, inst.depot_opening_costs[i]).unwrap();
        } else {
            writeln!(out, "{} {} {} {}", d.x, d.y, cap, inst.depot_opening_costs[i]).unwrap();
        }
    }
    writeln!(out, "CUSTOMER_SECTION").unwrap();
    for c in &inst.customers {
        writeln!(out, "{} {} {}", c.pos.x, c.pos.y, c.demand).unwrap();
    }
    writeln!(out, "EOF").unwrap();
    std::fs::write(path, out)?;
    Ok(())
}

/// Load a location-routing instance (`.json` or the sectioned text).
pub fn load_clrp(path: impl AsRef<Path>) -> Result<ClrpInstance> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    } else {
        parse_clrp(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let inst = ClrpInstance::new(
            vec![Point::new(1.5, 2.0), Point::new(9.0, 9.0)],
            vec![
                Customer {
                    pos: Point::new(3.25, 4.0),
                    demand: 7,
                },
                Customer {
                    pos: Point::new(5.0, 6.0),
                    demand: 9,
                },
            ],
            30,
            vec![100.0, f64::INFINITY],
            vec![12.5, 80.0],
            4.5,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.clrp");
        write_clrp(&inst, &path).unwrap();
        let back = parse_clrp(&path).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn missing_sections_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.clrp");
        std::fs::write(&path, "VEHICLE_CAPACITY : 10\nEOF\n").unwrap();
        assert!(parse_clrp(&path).is_err());
    }
}
