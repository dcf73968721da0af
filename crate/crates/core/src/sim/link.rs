//! Virtual links and synthetic resource readings.

use std::collections::HashMap;
use std::net::{IpAddr, SocketAddr};
use std::time::Duration;

use parking_lot::Mutex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::{LinkProfile, ResourceProfile};
use crate::daemon::{LinkEffect, LinkModel, MeterError, ResourceMeter};

/// Seeded generator for one stream of a scenario.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One link: profile plus its own random stream.
pub struct VirtualLink {
    profile: LinkProfile,
    rng: Mutex<ChaCha8Rng>,
}

impl VirtualLink {
    pub fn new(profile: LinkProfile, rng: ChaCha8Rng) -> Self {
        Self {
            profile,
            rng: Mutex::new(rng),
        }
    }

    fn leg(&self, rng: &mut ChaCha8Rng) -> f64 {
        let j = self.profile.jitter_ms;
        let noise = if j > 0.0 { rng.random_range(-j..=j) } else { 0.0 };
        (self.profile.base_one_way_ms + noise).max(0.0)
    }

    /// Round-trip delay for one reply, or `None` when the reply is lost.
    pub fn sample(&self) -> Option<Duration> {
        let mut rng = self.rng.lock();
        if self.profile.failure_probability > 0.0 && rng.random::<f64>() < self.profile.failure_probability {
            return None;
        }
        let ms = self.leg(&mut rng) + self.leg(&mut rng);
        Some(Duration::from_secs_f64(ms / 1000.0))
    }
}

/// Links keyed by the prober's source address. Peers without an entry get
/// no added delay.
#[derive(Default)]
pub struct LinkTable {
    links: HashMap<IpAddr, VirtualLink>,
}

impl LinkTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: IpAddr, link: VirtualLink) {
        self.links.insert(source, link);
    }
}

impl LinkModel for LinkTable {
    fn on_reply(&self, peer: SocketAddr) -> LinkEffect {
        match self.links.get(&peer.ip()) {
            Some(link) => match link.sample() {
                Some(d) => LinkEffect::Deliver(d),
                None => LinkEffect::Drop,
            },
            None => LinkEffect::Deliver(Duration::ZERO),
        }
    }
}

/// Resource readings drawn uniformly around the profile means.
pub struct SyntheticMeter {
    profile: ResourceProfile,
    rng: ChaCha8Rng,
}

impl SyntheticMeter {
    pub fn new(profile: ResourceProfile, rng: ChaCha8Rng) -> Self {
        Self { profile, rng }
    }

    fn draw(&mut self, mean: f64, jitter: f64) -> f64 {
        let noise = if jitter > 0.0 {
            self.rng.random_range(-jitter..=jitter)
        } else {
            0.0
        };
        (mean + noise).clamp(0.0, 100.0)
    }
}

impl ResourceMeter for SyntheticMeter {
    fn read(&mut self) -> Result<(f64, f64), MeterError> {
        let (cm, cj, mm, mj) = (
            self.profile.cpu_mean,
            self.profile.cpu_jitter,
            self.profile.mem_mean,
            self.profile.mem_jitter,
        );
        Ok((self.draw(cm, cj), self.draw(mm, mj)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(base: f64, jitter: f64, fail: f64) -> LinkProfile {
        LinkProfile {
            base_one_way_ms: base,
            jitter_ms: jitter,
            failure_probability: fail,
        }
    }

    #[test]
    fn delay_is_two_legs_within_jitter() {
        let link = VirtualLink::new(profile(50.0, 2.0, 0.0), stream_rng(1, 0));
        for _ in 0..1000 {
            let ms = link.sample().unwrap().as_secs_f64() * 1000.0;
            assert!((96.0 - 1e-9..=104.0 + 1e-9).contains(&ms), "{ms}");
        }
    }

    #[test]
    fn legs_never_go_negative() {
        let link = VirtualLink::new(profile(0.0, 5.0, 0.0), stream_rng(1, 0));
        for _ in 0..1000 {
            assert!(link.sample().unwrap() <= Duration::from_millis(10));
        }
    }

    #[test]
    fn certain_failure_always_drops() {
        let mut t = LinkTable::new();
        let ip: IpAddr = "127.0.1.1".parse().unwrap();
        t.insert(ip, VirtualLink::new(profile(1.0, 0.0, 1.0), stream_rng(1, 0)));
        assert_eq!(t.on_reply(SocketAddr::new(ip, 5000)), LinkEffect::Drop);
        let other: SocketAddr = "127.0.0.1:5000".parse().unwrap();
        assert_eq!(t.on_reply(other), LinkEffect::Deliver(Duration::ZERO));
    }

    #[test]
    fn same_seed_same_draws() {
        let a = VirtualLink::new(profile(10.0, 3.0, 0.2), stream_rng(42, 3));
        let b = VirtualLink::new(profile(10.0, 3.0, 0.2), stream_rng(42, 3));
        let c = VirtualLink::new(profile(10.0, 3.0, 0.2), stream_rng(42, 4));
        let da: Vec<_> = (0..50).map(|_| a.sample()).collect();
        let db: Vec<_> = (0..50).map(|_| b.sample()).collect();
        let dc: Vec<_> = (0..50).map(|_| c.sample()).collect();
        assert_eq!(da, db);
        assert_ne!(da, dc);
    }

    #[test]
    fn synthetic_meter_is_clamped() {
        let p = ResourceProfile {
            cpu_mean: 99.0,
            cpu_jitter: 5.0,
            mem_mean: 1.0,
            mem_jitter: 5.0,
            container_count: 0,
        };
        let mut m = SyntheticMeter::new(p, stream_rng(9, 1));
        for _ in 0..500 {
            let (c, mem) = m.read().unwrap();
            assert!((94.0..=100.0).contains(&c));
            assert!((0.0..=6.0).contains(&mem));
        }
    }
}
