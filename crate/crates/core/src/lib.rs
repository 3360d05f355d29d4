// SPDX-License-Identifier: Apache-2.0

//! Parametric runtime verification: specifications, monitor synthesis,
//! trace slicing and online monitoring.

pub mod analysis;
pub mod bench;
pub mod catalog;
pub mod cli;
pub mod compile;
pub mod engine;
pub mod logic;
pub mod report;
pub mod slicing;
pub mod spec;
pub mod trace;
