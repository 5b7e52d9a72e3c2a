//! Data model shared by every other module: scenario configuration, the
//! tiered topology, packets and sub-band plans.

pub mod config;
pub mod packet;
pub mod scenario_file;
pub mod topology;

pub use config::{
    validate_config, ArrivalModel, ConfigError, ScenarioConfig, Scheme, Split, Violation,
};
pub use packet::{BandId, Constituent, Hop, Packet, PacketId, Priority, SubBandPlan};
pub use scenario_file::{
    apply_key, load_scenario, parse_scenario, scenario_keys, to_scenario_string, KeyError,
    ScenarioFileError,
};
pub use topology::{build_topology, LinkState, NodeId, NodeInfo, Tier, Topology, CBS};

/// Speed of propagation used for every hop.
pub const SPEED_OF_LIGHT_M_S: f64 = 3e8;
