use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

/// Cancellation flag and progress gauge shared between a long-running
/// computation and whoever started it.
#[derive(Debug, Default)]
pub struct JobControl {
    cancelled: AtomicBool,
    progress: AtomicU64,
}

impl JobControl {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.cancelled.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }

    /// Fraction done in `[0, 1]`.
    pub fn progress(&self) -> f64 {
        f64::from_bits(self.progress.load(Ordering::Relaxed))
    }

    pub fn set_progress(&self, fraction: f64) {
        self.progress
            .store(fraction.clamp(0.0, 1.0).to_bits(), Ordering::Relaxed);
    }
}
