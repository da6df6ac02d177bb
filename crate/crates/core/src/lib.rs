// SPDX-License-Identifier: Apache-2.0

//! Constructive adversarial scheduler for asynchronous consensus.
//!
//! Builds, for a deterministic message-passing protocol that tolerates one
//! crash, an infinite admissible execution in which no process decides.

pub mod adversary;
pub mod cli;
pub mod model;
pub mod oracle;
pub mod protocols;
pub mod trace;
pub mod verify;
