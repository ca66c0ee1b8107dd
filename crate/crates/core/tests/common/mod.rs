#![allow(dead_code)]

use istn_core::caching::CacheState;
use istn_core::channel::ChannelState;
use istn_core::ciim::{SlotContext, World};
use istn_core::link_budget::LinkParams;
use istn_core::scenario::Scenario;
use istn_core::uara::associate_gus;

/// Small Walker world with `m` TBSs, `j` GUs and `c` terrestrial subchannels.
pub fn small_scenario(m: usize, j: usize, c: usize, seed: u64) -> Scenario {
    let mut s = Scenario::from_toml_str(&format!(
        r#"
        n_tbs = {m}
        n_gu = {j}
        n_sc_terrestrial = {c}
        n_sc_leo = 2
        n_connect = 2
        n_timeslots = 3
        [caching]
        files = 8
        cache_capacity = 4
        [constellation]
        model = "walker"
        planes = 6
        sats_per_plane = 10
        altitude_m = 550000.0
        inclination_deg = 53.0
        "#
    ))
    .expect("valid small scenario");
    s.rng_seed = seed;
    s
}

/// Everything one slot needs, owned.
pub struct Slot {
    pub scenario: Scenario,
    pub ch: ChannelState,
    pub cache: CacheState,
    pub lp: LinkParams,
    pub association: Vec<usize>,
}

impl Slot {
    pub fn new(scenario: Scenario, t: usize) -> Slot {
        let world = World::build(&scenario).expect("world builds");
        Slot::from_world(&world, t)
    }

    pub fn from_world(world: &World, t: usize) -> Slot {
        let ch = world.channels(t);
        let cache = world.cache(t);
        let lp = LinkParams::new(&world.scenario, &ch);
        let association = associate_gus(&ch.mean_terr);
        Slot { scenario: world.scenario.clone(), ch, cache, lp, association }
    }

    pub fn ctx(&self) -> SlotContext<'_> {
        SlotContext { scenario: &self.scenario, ch: &self.ch, cache: &self.cache, lp: &self.lp, association: &self.association }
    }
}

/// One pass/fail line per acceptance criterion.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("[criterion {id:>2}] {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}
