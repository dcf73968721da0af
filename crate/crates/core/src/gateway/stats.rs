use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpKind {
    Read,
    Write,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OpTimingStats {
    pub read_count: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub read_mean_ms: Option<f64>,
    pub write_count: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub write_mean_ms: Option<f64>,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    count: u64,
    sum_ms: f64,
}

impl Acc {
    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_ms / self.count as f64)
    }
}

/// Running request-duration means since startup.
#[derive(Default)]
pub struct TimingStats {
    inner: Mutex<(Acc, Acc)>,
}

impl TimingStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, kind: OpKind, elapsed_ms: f64) -> OpTimingStats {
        let mut g = self.inner.lock();
        let acc = match kind {
            OpKind::Read => &mut g.0,
            OpKind::Write => &mut g.1,
        };
        acc.count += 1;
        acc.sum_ms += elapsed_ms.max(0.0);
        Self::view(&g)
    }

    pub fn snapshot(&self) -> OpTimingStats {
        Self::view(&self.inner.lock())
    }

    fn view((r, w): &(Acc, Acc)) -> OpTimingStats {
        OpTimingStats {
            read_count: r.count,
            read_mean_ms: r.mean(),
            write_count: w.count,
            write_mean_ms: w.mean(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn means_per_kind() {
        let s = TimingStats::new();
        s.record(OpKind::Read, 4.0);
        let v = s.record(OpKind::Read, 6.0);
        assert_eq!(v.read_count, 2);
        assert_eq!(v.read_mean_ms, Some(5.0));
        assert_eq!(v.write_count, 0);
        assert_eq!(v.write_mean_ms, None);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"{"readCount":2,"readMeanMs":5.0,"writeCount":0}"#);
    }
}
