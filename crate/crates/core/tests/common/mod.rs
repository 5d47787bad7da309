#![allow(dead_code)]

use tfr_core::layout::{DomainSpec, EdgeCondition, Edges, HeatSource, SourceShape, SystemSpec};

pub const L: f64 = 0.1;

/// One small centered source; every edge held at `edges`.
pub fn square_system(n: usize, edges: Edges) -> SystemSpec {
    SystemSpec {
        domain: DomainSpec {
            side_length: L,
            grid_n: n,
            conductivity: 1.0,
        },
        sources: vec![HeatSource::uniform(SourceShape::Rectangle, [0.05, 0.05], 0.012, 0.012)],
        edges,
        case_tag: None,
    }
}

pub fn dirichlet(t0: f64) -> EdgeCondition {
    EdgeCondition::DirichletConst { t0 }
}
