//! Per-thread operation counters.
//!
//! Every kernel assembly and every LU factorization bumps a thread-local
//! counter, so an operation can report exactly how much heavy work it did.
//! Counters are per thread: concurrent callers on other threads never
//! disturb each other's readings.

use std::cell::Cell;

use serde::Serialize;

thread_local! {
    static ASSEMBLIES: Cell<u64> = const { Cell::new(0) };
    static FACTORIZATIONS: Cell<u64> = const { Cell::new(0) };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub assemblies: u64,
    pub factorizations: u64,
}

impl Counters {
    pub fn since(self, earlier: Counters) -> Counters {
        Counters {
            assemblies: self.assemblies - earlier.assemblies,
            factorizations: self.factorizations - earlier.factorizations,
        }
    }
}

pub fn snapshot() -> Counters {
    Counters {
        assemblies: ASSEMBLIES.with(Cell::get),
        factorizations: FACTORIZATIONS.with(Cell::get),
    }
}

pub(crate) fn record_assembly() {
    ASSEMBLIES.with(|c| c.set(c.get() + 1));
}

pub(crate) fn record_factorization() {
    FACTORIZATIONS.with(|c| c.set(c.get() + 1));
}
