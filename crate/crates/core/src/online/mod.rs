//! Online, rate-unaware placement.

pub mod netduel;

pub use netduel::{
    netduel_run, DuelState, DuelStatus, NetDuel, NetDuelConfig, NetDuelRun, RequestOutcome, SeriesPoint,
    SwapEvent, VirtualRule,
};
