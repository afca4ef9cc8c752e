//! Simulator and capacity-analysis toolkit for time-slotted multi-commodity
//! wireless networks whose weak links use rateless codes (mutual information
//! accumulation): a receiver collects partial decode information across slots
//! at rate `r < 1` per slot instead of needing a whole packet in one slot.
//!
//! The crate has two halves that cross-check each other:
//!
//! * **Scheduling policies + engines** ([`policy`], [`engine`]): an epoch-based
//!   max-weight backpressure scheduler that holds link/commodity pairings for
//!   `T` consecutive slots, a per-slot virtual-queue scheduler that tracks
//!   committed-but-undecoded packets and accumulated information per link, an
//!   enhanced variant biased toward strong links at light load, and a
//!   stationary randomized policy driven by a capacity certificate.
//! * **Capacity-region oracles** ([`capacity`]): exact rational LP feasibility
//!   and margin queries for the achievable arrival-rate region, in both the
//!   direct flow formulation and the layered (push/transmit/decode) pipeline
//!   formulation, solved by a built-in exact simplex.
//!
//! Everything downstream of config parsing is exact rational arithmetic
//! ([`num::BigRational`]); simulations are bitwise deterministic for a given
//! seed via a counter-based RNG with per-stream keys ([`rng`]). Runtime
//! Lyapunov-drift monitors ([`metrics::drift`]) verify per-slot and per-epoch
//! drift inequalities on the realized sample path, and closed-form backlog
//! bound calculators ([`metrics::bounds`]) give the analytic comparison
//! points.

pub mod model;
pub mod rational;
pub mod rng;
