//! Thread-local multiply-add counter used by run reports and the
//! structured-vs-dense cost comparisons.

use std::cell::Cell;

thread_local! {
    static MADDS: Cell<u64> = const { Cell::new(0) };
}

/// Record `n` multiply-adds on the current thread.
#[inline]
pub fn add(n: u64) {
    MADDS.with(|c| c.set(c.get().wrapping_add(n)));
}

/// Multiply-adds recorded on this thread since the last [`reset`].
pub fn total() -> u64 {
    MADDS.with(|c| c.get())
}

/// Zero the counter (call between runs).
pub fn reset() {
    MADDS.with(|c| c.set(0));
}
