//! Matheuristics for the selective and periodic inventory routing problem
//! (SPIRP): a fleet collects waste vegetable oil from selectable customer
//! nodes over a cyclic planning horizon, and any shortfall at the depot is
//! covered by purchasing virgin oil.
//!
//! The pipeline solves a relaxation without routing (IRR) to harvest an
//! elite pool of collection plans and a valid lower bound, completes each
//! plan into vehicle routes (knapsack peeling + bin-packing repair + greedy
//! TSP), and optionally re-optimizes every period with an exact
//! one-commodity-flow CVRP warm-started from the constructed routes.
//!
//! All mixed-integer solves go through [`milp`], a self-contained
//! branch-and-bound over a bounded-variable revised simplex, so the crate
//! has no external solver dependency and every run is deterministic.

pub mod construction;
pub mod instance;
pub mod irr;
pub mod milp;
pub mod mip_search;
pub mod orchestrator;
pub mod report;
pub mod solution;
