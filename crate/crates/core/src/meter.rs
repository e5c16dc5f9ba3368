/// Counts letter comparisons: one unit per equality or adjacency test
/// between two letters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OperationMeter {
    count: u64,
    enabled: bool,
}

impl OperationMeter {
    pub fn enabled() -> Self {
        OperationMeter {
            count: 0,
            enabled: true,
        }
    }

    pub fn disabled() -> Self {
        OperationMeter::default()
    }

    #[inline(always)]
    pub fn add(&mut self, k: u64) {
        if self.enabled {
            self.count += k;
        }
    }

    #[inline(always)]
    pub fn tick(&mut self) {
        self.add(1);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }
}
