//! Problem and solution data types, feasibility semantics, random
//! instance generators, and benchmark file I/O.

pub mod generate;
pub mod io;
pub mod types;

pub use generate::{generate_cvrp, generate_mdvrp, quadrant, quadrant_demand};
pub use io::{
    load_cvrp, load_mdvrp, parse_cordeau, parse_tsplib_cvrp, write_cordeau, write_cvrp,
    write_mdvrp, write_tsplib_cvrp,
};
pub use types::{
    decompose, ClrpInstance, Customer, CvrpInstance, DemandModel, InstanceSpec, MdvrpInstance,
    Positioning, Route, RoutingSolution, Subproblem,
};
