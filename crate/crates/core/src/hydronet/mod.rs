//! Lake-river network topology and its delayed monthly water balance.

mod dynamics;
mod topology;

pub use dynamics::{
    forcing_from_indicators, montreal_balance, river_flow, simulate, step, water_level_index,
    ControlPlan, FlowCoefficients, FlowFit, LakeState, MonthForcing, Trajectory,
};
pub use topology::{
    default_topology, EdgeSpec, Endpoint, FlowBounds, LakeId, LakeSpec, NetworkTopology, PerLake,
    PerRiver, RiverId, DAY_SECONDS, DEFAULT_AREAS, DEFAULT_MONTH_DAYS, NOMINAL_ST_LAWRENCE_FLOW,
    NOMINAL_ST_MARYS_FLOW,
};

#[cfg(test)]
mod tests;
