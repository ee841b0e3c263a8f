//! Multi-robot mission decomposition, primitive-based task and motion
//! planning, and a passive-safe execution simulator.

pub mod automata;
pub mod cltlb;
pub mod mission;
pub mod planner;
pub mod primspec;
pub mod scene;
pub mod simulator;
pub mod smtgate;

pub use automata::{Alphabet, Dfa, Event, Inclusion, Word};
pub use cltlb::{Formula, Trace};
pub use planner::{Feedback, Plan, PlanStep};
pub use primspec::PrimitiveKind;
pub use scene::Scene;
pub use simulator::{DwaParams, SimLog};
