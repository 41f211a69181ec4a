//! Positional topologies, on-demand route discovery, node-disjoint path
//! selection and multicast over prioritised paths.

pub mod aodv;
pub mod multicast;
pub mod paths;
pub mod topology;

pub use aodv::{flood, Aodv, Discovery, Flood, RoutingEntry};
pub use multicast::{multicast_transmit, Breakage, DeliveryReport, MulticastMode};
pub use paths::{
    check_disjoint, maintain_routes, path_alive, select_disjoint_paths, Maintenance, PathSet,
};
pub use topology::{create_topology, parse_moves, parse_topology, Move, Topology, TopologyParams};

use thiserror::Error;

use crate::contact::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultipathError {
    #[error("no route from {from} to {to} after {control_messages} control messages")]
    NoRoute {
        from: NodeId,
        to: NodeId,
        control_messages: u64,
    },
    #[error("every path from {from} to {to} is broken and rediscovery failed")]
    AllPathsBroken { from: NodeId, to: NodeId },
    #[error("source and destination are both {0}")]
    SameNode(NodeId),
    #[error("node {0} is not in the topology")]
    UnknownNode(NodeId),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid topology: {0}")]
    Invalid(String),
}
