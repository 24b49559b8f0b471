use std::collections::{HashMap, HashSet, VecDeque};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unicoat::analysis::{is_legal, matching_dilation, md_bottleneck_feasible};
use unicoat::grid::{distance, hexagon, layer_of, layer_one_cycle, Direction, LayerMap, Node};
use unicoat::harness::{
    gen_gap_theorem1, gen_hexagon, gen_line_lemma1, run_trials, validate_instance, Execution,
    ExperimentPlan, Instance,
};
use unicoat::model::{Configuration, ForestGraph, ParticleId, Port};
use unicoat::scheduler::path::{
    check_progress_windows, run_forest_path, tail_fill_time, ForestPath,
};
use unicoat::scheduler::{
    build_greedy_forest_schedule, check_dominance, check_expanded_parent_invariant, run_async,
    validate_parallel_schedule, ActivationPolicy, Event, FlagEvent, RunOptions, ScheduleMode,
    Trace,
};

fn dirs() -> impl Iterator<Item = Direction> {
    (0..6).map(Direction::new)
}

fn bfs_distance(from: Node, to: Node) -> u32 {
    let mut seen = HashSet::from([from]);
    let mut queue = VecDeque::from([(from, 0)]);
    while let Some((v, d)) = queue.pop_front() {
        if v == to {
            return d;
        }
        for w in v.neighbors() {
            if seen.insert(w) {
                queue.push_back((w, d + 1));
            }
        }
    }
    unreachable!()
}

/// Layer of every node within `depth` of `object`, by plain BFS.
fn bfs_layers(object: &HashSet<Node>, depth: u32) -> HashMap<Node, u32> {
    let mut layer: HashMap<Node, u32> = object.iter().map(|&v| (v, 0)).collect();
    let mut queue: VecDeque<Node> = object.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        let d = layer[&v];
        if d == depth {
            continue;
        }
        for w in v.neighbors() {
            if let std::collections::hash_map::Entry::Vacant(e) = layer.entry(w) {
                e.insert(d + 1);
                queue.push_back(w);
            }
        }
    }
    layer
}

fn random_blob(rng: &mut ChaCha8Rng, size: usize) -> Vec<Node> {
    let mut nodes = vec![Node::ORIGIN];
    while nodes.len() < size {
        let base = nodes[rng.gen_range(0..nodes.len())];
        let w = base.neighbors()[rng.gen_range(0..6)];
        if !nodes.contains(&w) {
            nodes.push(w);
        }
    }
    nodes
}

/// A valid instance with a small object and up to `max_n` particles.
fn random_instance(seed: u64, max_object: usize, max_n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let size = rng.gen_range(1..=max_object);
        let object = random_blob(&mut rng, size);
        let n = rng.gen_range(1..=max_n);
        let mut occupied = object.clone();
        let mut particles = Vec::new();
        while particles.len() < n {
            let base = occupied[rng.gen_range(0..occupied.len())];
            let w = base.neighbors()[rng.gen_range(0..6)];
            if !occupied.contains(&w) {
                occupied.push(w);
                particles.push(w);
            }
        }
        let inst = Instance::new(object, particles, seed);
        if validate_instance(&inst, false).is_valid() {
            return inst;
        }
    }
}

/// Lowest and highest layer touched by each directed cycle of the graph.
fn cycle_layers(g: &ForestGraph, object: &HashSet<Node>) -> Vec<(u32, u32)> {
    let next: HashMap<Node, Node> = g.edges.iter().copied().collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for start in g.cycle_nodes() {
        if seen.contains(&start) {
            continue;
        }
        let (mut lo, mut hi) = (u32::MAX, 0);
        let mut v = start;
        while seen.insert(v) {
            let l = layer_of(v, object);
            lo = lo.min(l);
            hi = hi.max(l);
            v = next[&v];
        }
        out.push((lo, hi));
    }
    out
}

fn small_hexagon() -> impl Strategy<Value = (u32, usize, u64)> {
    (1u32..=3, 1usize..=30, any::<u64>())
}

fn run_recorded(inst: &Instance, seed: u64, capacity: u8) -> unicoat::scheduler::RunResult {
    let mut opts = RunOptions::with_seed(seed);
    opts.record_trace = true;
    opts.record_snapshots = true;
    opts.check_invariants = true;
    opts.params.flag_capacity = capacity;
    run_async(inst.configuration(seed), &opts).expect("run stays within the model")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_distance_is_shortest_path_length(a in -12i32..12, b in -12i32..12, c in -12i32..12, d in -12i32..12) {
        let (v, w) = (Node::new(a, b), Node::new(c, d));
        prop_assert_eq!(distance(v, w), bfs_distance(v, w));
        prop_assert_eq!(distance(v, w), distance(w, v));
    }

    #[test]
    fn neighbors_are_a_bijection(q in -1000i32..1000, r in -1000i32..1000) {
        let v = Node::new(q, r);
        let mut seen = HashSet::new();
        for d in dirs() {
            let w = v.neighbor(d);
            prop_assert_eq!(w.neighbor(d.opposite()), v);
            prop_assert_eq!(distance(v, w), 1);
            prop_assert!(seen.insert(w));
        }
        let (sq, sr) = dirs()
            .map(|d| Node::ORIGIN.neighbor(d))
            .fold((0, 0), |(a, b), w| (a + w.q, b + w.r));
        prop_assert_eq!((sq, sr), (0, 0));
    }

    #[test]
    fn single_node_layers_grow_by_six(q in -50i32..50, r in -50i32..50, i in 1u32..12) {
        let v = Node::new(q, r);
        let map = LayerMap::new([v].iter(), i);
        prop_assert_eq!(map.count(i), 6 * i as usize);
    }

    #[test]
    fn layers_partition_the_surroundings(seed in any::<u64>(), size in 1usize..12, depth in 1u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let object: HashSet<Node> = random_blob(&mut rng, size).into_iter().collect();
        let expected = bfs_layers(&object, depth);
        let map = LayerMap::new(&object, depth);
        let mut covered = HashSet::new();
        for i in 1..=depth {
            for &v in map.nodes(i) {
                prop_assert_eq!(expected.get(&v), Some(&i));
                prop_assert_eq!(layer_of(v, &object), i);
                prop_assert!(covered.insert(v));
            }
        }
        let outside = expected.values().filter(|&&l| l > 0).count();
        prop_assert_eq!(covered.len(), outside);
    }

    #[test]
    fn handover_keeps_the_occupied_nodes(dir in 0u8..6, side in 0u8..6, offsets in proptest::collection::vec(0u8..6, 2)) {
        // particle 0 expands away from the object; particle 1 sits next to its tail
        let start = Node::new(3, 3);
        let tail_dir = Direction::new(dir);
        let partner_at = start.neighbor(Direction::new(side));
        prop_assume!(partner_at != start.neighbor(tail_dir));
        let mut cfg = Configuration::new([Node::new(-5, -5)], &[start, partner_at], &offsets);
        let a = ParticleId(0);
        let port = cfg.particle(a).local(tail_dir);
        cfg.expand(a, port).unwrap();
        let before = cfg.occupied_sorted();
        cfg.handover(ParticleId(1), a).unwrap();
        prop_assert_eq!(cfg.occupied_sorted(), before);
        prop_assert!(cfg.occupancy_consistent());
        prop_assert!(cfg.particle(a).is_contracted());
        prop_assert!(cfg.particle(ParticleId(1)).is_expanded());
    }

    #[test]
    fn local_ports_keep_clockwise_order(offset in 0u8..6, label in 0u8..6) {
        let cfg = Configuration::new([Node::ORIGIN], &[Node::new(1, 0)], &[offset]);
        let p = &cfg.particles()[0];
        let d = p.global(Port(label));
        prop_assert_eq!(p.local(d), Port(label));
        prop_assert_eq!(p.global(Port(label).rotate(1)), d.rotate(1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn executions_stay_connected_and_end_legal((radius, n, seed) in small_hexagon()) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let r = run_recorded(&inst, seed, 2);
        prop_assert!(r.is_quiescent());
        prop_assert!(r.config.particles().iter().all(|p| p.is_contracted()));
        prop_assert!(is_legal(&r.config));
        for snap in &r.snapshots {
            let nodes: HashSet<Node> = snap
                .particles
                .iter()
                .flat_map(|p| [p.head, p.tail])
                .chain(inst.object.iter().copied())
                .collect();
            prop_assert!(unicoat::grid::is_connected(&nodes));
            let count: usize = snap.particles.iter().map(|p| 1 + usize::from(p.head != p.tail)).sum();
            prop_assert_eq!(count + inst.object.len(), nodes.len());
        }
    }

    #[test]
    fn forest_graph_is_a_forest_or_one_ring_of_trees((radius, n, seed) in small_hexagon()) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let object = inst.object_set();
        let mut opts = RunOptions::with_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        opts.check_invariants = true;
        let mut sim = unicoat::scheduler::Simulation::new(inst.configuration(seed), &opts);
        for round in 0..opts.round_limit(n) {
            let seq = opts.policy.round_sequence(n, round, &mut rng);
            let (changed, _) = sim.run_round(&seq).unwrap();
            let g = sim.config().build_forest_graph();
            prop_assert!(g.max_out_degree() <= 1);
            let cycles = cycle_layers(&g, &object);
            prop_assert!(cycles.len() <= 1, "round {}: {} cycles", sim.round(), cycles.len());
            for (lo, hi) in cycles {
                prop_assert!(hi - lo <= 1, "round {}: cycle spans layers {}..={}", sim.round(), lo, hi);
            }
            if !changed {
                break;
            }
        }
    }

    #[test]
    fn complaint_flags_are_conserved((radius, n, seed) in small_hexagon(), capacity in 1u8..=2) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let r = run_recorded(&inst, seed, capacity);
        let trace = r.trace.as_ref().unwrap();
        let held = |i: usize| r.snapshots[i].particles.iter().map(|p| p.flags as i64).sum::<i64>();
        let mut balance = held(0);
        for (i, round) in trace.rounds.iter().enumerate() {
            for e in &round.events {
                match e {
                    Event::Flag(FlagEvent::Create { .. }) => balance += 1,
                    Event::Flag(FlagEvent::Clear { .. }) => balance -= 1,
                    Event::Move(m) if m.consumes_flag => balance -= 1,
                    _ => {}
                }
            }
            prop_assert_eq!(balance, held(i + 1), "round {}", round.round);
        }
    }

    #[test]
    fn retirement_is_monotone_and_sweeps_counter_clockwise((radius, n, seed) in small_hexagon()) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let r = run_recorded(&inst, seed, 2);
        let cycle = layer_one_cycle(&inst.object_set());
        let mut retired_before: HashSet<usize> = HashSet::new();
        for snap in &r.snapshots {
            let retired: HashSet<usize> = snap
                .particles
                .iter()
                .enumerate()
                .filter(|(_, p)| p.state == "retired")
                .map(|(i, _)| i)
                .collect();
            prop_assert!(retired.is_superset(&retired_before));
            let ring: HashSet<Node> = retired
                .iter()
                .map(|&i| snap.particles[i].head)
                .filter(|v| cycle.contains(v))
                .collect();
            if !ring.is_empty() {
                let leader = r.leader.expect("retirement needs a leader");
                let at = cycle.iter().position(|&v| v == leader).unwrap();
                let m = cycle.len();
                let sweep: HashSet<Node> = (0..ring.len()).map(|j| cycle[(at + m - j) % m]).collect();
                prop_assert_eq!(&ring, &sweep);
            }
            retired_before = retired;
        }
    }

    #[test]
    fn outer_layers_retire_only_above_complete_layers((radius, n, seed) in (1u32..=2, 8usize..=30, any::<u64>())) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let r = run_recorded(&inst, seed, 2);
        let object = inst.object_set();
        let layers = bfs_layers(&object, n as u32 + 1);
        for snap in &r.snapshots {
            let retired_at: HashSet<Node> = snap
                .particles
                .iter()
                .filter(|p| p.state == "retired")
                .map(|p| p.head)
                .collect();
            for &v in &retired_at {
                let l = layers[&v];
                if l >= 2 {
                    let below = layers.iter().filter(|&(_, &k)| k == l - 1).map(|(w, _)| w);
                    for w in below {
                        prop_assert!(retired_at.contains(w), "round {}: {} retired before {} in layer {}", snap.round, v, w, l - 1);
                    }
                }
            }
        }
    }

    #[test]
    fn final_layer_occupancy_ignores_chirality((radius, n, seed) in small_hexagon(), other in any::<u64>()) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let object = inst.object_set();
        let histogram = |offsets: &[u8]| {
            let cfg = Configuration::new(inst.object.iter().copied(), &inst.particles, offsets);
            let r = run_async(cfg, &RunOptions::with_seed(seed)).unwrap();
            let mut layers: Vec<u32> = r.config.occupied_sorted().iter().map(|&v| layer_of(v, &object)).collect();
            layers.sort_unstable();
            layers
        };
        prop_assert_eq!(
            histogram(&inst.chirality_offsets(seed)),
            histogram(&inst.chirality_offsets(other))
        );
    }

    #[test]
    fn incomplete_first_layer_still_quiesces_legally(seed in any::<u64>(), n in 1usize..=11) {
        let inst = gen_hexagon(1, n, seed).unwrap();
        let r = run_recorded(&inst, seed, 2);
        prop_assert!(r.is_quiescent());
        prop_assert!(is_legal(&r.config));
        prop_assert_eq!(r.leader, None);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rounds_include_every_particle(n in 1usize..60, round in 0u64..100, seed in any::<u64>()) {
        for policy in [ActivationPolicy::RandomPermutationRounds, ActivationPolicy::UniformRandomSingles] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let seq = policy.round_sequence(n, round, &mut rng);
            let ids: HashSet<usize> = seq.iter().map(|p| p.0).collect();
            prop_assert_eq!(ids, (0..n).collect::<HashSet<_>>());
        }
    }

    #[test]
    fn scripted_rounds_repeat(n in 1usize..8, len in 1usize..4, seed in any::<u64>(), round in 0u64..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let script: Vec<Vec<ParticleId>> = (0..len)
            .map(|_| {
                let mut ids: Vec<ParticleId> = (0..n).map(ParticleId).collect();
                rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);
                ids
            })
            .collect();
        let policy = ActivationPolicy::Scripted(script.clone());
        let seq = policy.round_sequence(n, round, &mut rng);
        prop_assert_eq!(&seq, &script[round as usize % len]);
    }

    #[test]
    fn greedy_schedules_are_valid_and_no_longer_than_needed(
        (radius, n, seed) in small_hexagon(),
        complaint in any::<bool>(),
    ) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let (mode, capacity) = if complaint { (ScheduleMode::Complaint, 1) } else { (ScheduleMode::Plain, 2) };
        let r = run_recorded(&inst, seed, capacity);
        let trace = r.trace.unwrap();
        let sched = build_greedy_forest_schedule(&trace, mode, seed).unwrap();
        prop_assert!(validate_parallel_schedule(&sched).is_ok());
        prop_assert!(check_dominance(&trace, &sched).is_ok());
        prop_assert!(check_expanded_parent_invariant(&trace, &sched).is_ok());
        let last_move = trace
            .rounds
            .iter()
            .filter(|t| t.movements().next().is_some())
            .map(|t| t.round)
            .max()
            .unwrap_or(0);
        prop_assert!(last_move <= sched.len() as u64, "last move {} vs {} steps", last_move, sched.len());
    }

    #[test]
    fn tails_fill_within_twice_path_plus_particles(len in 3usize..24, k in 1usize..24, seed in any::<u64>()) {
        prop_assume!(k <= len);
        let fx = ForestPath::spread(len, k, seed);
        fx.validate().unwrap();
        let run = run_forest_path(&fx, ScheduleMode::Plain, seed, 10_000);
        prop_assert!(validate_parallel_schedule(&run.schedule).is_ok());
        let t = tail_fill_time(&fx, &run, k);
        prop_assert!(t.is_some_and(|t| t <= 2 * (len + k)), "fill time {:?}", t);
    }

    #[test]
    fn complaint_rings_make_progress_in_every_window(radius in 1u32..=3, extra in 0usize..12, seed in any::<u64>()) {
        let fx = ForestPath::ring(radius, extra, seed);
        fx.validate().unwrap();
        let run = run_forest_path(&fx, ScheduleMode::Complaint, seed, 10_000);
        prop_assert!(validate_parallel_schedule(&run.schedule).is_ok());
        prop_assert!(check_progress_windows(&fx, &run).is_ok());
    }
}

/// Smallest bottleneck over every legal target set, by exhaustive search.
fn exhaustive_md(object: &HashSet<Node>, particles: &[Node]) -> u32 {
    let n = particles.len();
    let layers = bfs_layers(object, n as u32 + 1);
    let mut forced = Vec::new();
    let mut i = 1;
    let partial: Vec<Node> = loop {
        let mut ring: Vec<Node> = layers
            .iter()
            .filter(|&(_, &l)| l == i)
            .map(|(&v, _)| v)
            .collect();
        ring.sort_unstable();
        if forced.len() + ring.len() >= n {
            break ring;
        }
        forced.extend(ring);
        i += 1;
    };
    let need = n - forced.len();
    let mut best = u32::MAX;
    let mut pick = Vec::new();
    choose(&partial, need, 0, &mut pick, &mut |chosen| {
        let targets: Vec<Node> = forced.iter().chain(chosen.iter()).copied().collect();
        best = best.min(bottleneck(particles, &targets));
    });
    best
}

fn choose(
    pool: &[Node],
    k: usize,
    from: usize,
    pick: &mut Vec<Node>,
    visit: &mut dyn FnMut(&[Node]),
) {
    if pick.len() == k {
        visit(pick);
        return;
    }
    for i in from..pool.len() {
        if pool.len() - i < k - pick.len() {
            break;
        }
        pick.push(pool[i]);
        choose(pool, k, i + 1, pick, visit);
        pick.pop();
    }
}

/// Bottleneck assignment of particles onto an equal number of targets.
fn bottleneck(particles: &[Node], targets: &[Node]) -> u32 {
    let n = particles.len();
    let mut dp = vec![u32::MAX; 1 << n];
    dp[0] = 0;
    for mask in 0usize..(1 << n) {
        if dp[mask] == u32::MAX {
            continue;
        }
        let t = targets[mask.count_ones() as usize % n.max(1)];
        if mask.count_ones() as usize == n {
            continue;
        }
        for (p, &v) in particles.iter().enumerate() {
            if mask & (1 << p) == 0 {
                let next = mask | (1 << p);
                dp[next] = dp[next].min(dp[mask].max(distance(v, t)));
            }
        }
    }
    dp[(1 << n) - 1]
}

fn legal_by_definition(cfg: &Configuration) -> bool {
    if cfg.particles().iter().any(|p| p.is_expanded()) {
        return false;
    }
    let layers = bfs_layers(cfg.object(), cfg.len() as u32 + 4);
    let occupied: HashSet<Node> = cfg.occupied_nodes().collect();
    let deepest = occupied
        .iter()
        .map(|v| layers.get(v).copied().unwrap_or(u32::MAX))
        .max()
        .unwrap_or(0);
    layers
        .iter()
        .filter(|&(_, &l)| l >= 1 && l < deepest)
        .all(|(v, _)| occupied.contains(v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matching_dilation_agrees_with_exhaustive_search(seed in any::<u64>()) {
        let inst = random_instance(seed, 5, 8);
        let object = inst.object_set();
        let md = matching_dilation(&object, &inst.particles).unwrap();
        prop_assert_eq!(md.value, exhaustive_md(&object, &inst.particles));
    }

    #[test]
    fn bottleneck_search_is_exact_and_monotone(seed in any::<u64>()) {
        let inst = random_instance(seed, 6, 10);
        let object = inst.object_set();
        let md = matching_dilation(&object, &inst.particles).unwrap().value;
        for c in 0..md + 3 {
            prop_assert_eq!(md_bottleneck_feasible(&object, &inst.particles, c), c >= md, "c = {}", c);
        }
    }

    #[test]
    fn legality_matches_the_definition(seed in any::<u64>(), keep in 0.6f64..1.0, expand in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let size = rng.gen_range(1..6);
        let object: HashSet<Node> = random_blob(&mut rng, size).into_iter().collect();
        let layers = bfs_layers(&object, 3);
        let mut near: Vec<(u32, Node)> = layers.iter().filter(|&(_, &l)| l > 0).map(|(&v, &l)| (l, v)).collect();
        near.sort_unstable();
        let positions: Vec<Node> = near
            .iter()
            .filter(|(l, _)| rng.gen_bool(keep.powi(*l as i32)))
            .map(|&(_, v)| v)
            .collect();
        prop_assume!(!positions.is_empty());
        let offsets = vec![0; positions.len()];
        let mut cfg = Configuration::new(object.iter().copied(), &positions, &offsets);
        if expand {
            let id = ParticleId(rng.gen_range(0..positions.len()));
            let free = dirs().find(|&d| cfg.is_free(cfg.particle(id).head.neighbor(d)));
            if let Some(d) = free {
                let port = cfg.particle(id).local(d);
                cfg.expand(id, port).unwrap();
            }
        }
        prop_assert_eq!(is_legal(&cfg), legal_by_definition(&cfg));
    }

    #[test]
    fn dilation_never_exceeds_rounds((radius, n, seed) in small_hexagon()) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let r = run_async(inst.configuration(seed), &RunOptions::with_seed(seed)).unwrap();
        let md = matching_dilation(&inst.object_set(), &inst.particles).unwrap().value;
        prop_assert!(r.is_quiescent());
        prop_assert!(md as u64 <= r.rounds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn instances_survive_json(seed in any::<u64>(), tag in "[a-z]{1,8}") {
        let inst = random_instance(seed, 8, 12).with_meta("tag", tag);
        let back = Instance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn traces_survive_jsonl((radius, n, seed) in small_hexagon()) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        let trace = run_recorded(&inst, seed, 2).trace.unwrap();
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let back = Trace::read_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn generated_instances_are_valid((radius, n, seed) in (0u32..=5, 1usize..=80, any::<u64>())) {
        let inst = gen_hexagon(radius, n, seed).unwrap();
        prop_assert_eq!(inst.n(), n);
        prop_assert_eq!(inst.object.len(), hexagon(Node::ORIGIN, radius).len());
        let report = validate_instance(&inst, true);
        prop_assert!(report.is_valid(), "{:?}", report.violations);

        let line = gen_line_lemma1(n).unwrap();
        prop_assert_eq!(line.n(), n);
        prop_assert!(validate_instance(&line, false).is_valid());

        let gap_n = 8 + 4 * (n % 10);
        let gap = gen_gap_theorem1(gap_n).unwrap();
        prop_assert_eq!(gap.n(), gap_n);
        prop_assert!(validate_instance(&gap, false).is_valid());
    }

    #[test]
    fn trial_results_depend_only_on_their_seed(trials in 1usize..4, base in 0u64..1000) {
        let mut plan = ExperimentPlan::hexagon(vec![1, 2], vec![6, 13], trials);
        plan.seed_base = base;
        let fewer = run_trials(&plan, Execution::Sequential).unwrap();
        plan.trials += 1;
        let more = run_trials(&plan, Execution::Parallel).unwrap();
        for rec in &fewer {
            let twin = more
                .iter()
                .find(|m| m.radius == rec.radius && m.n == rec.n && m.trial == rec.trial)
                .unwrap();
            prop_assert_eq!(twin, rec);
        }
        prop_assert_eq!(more.len(), fewer.len() + 4);
    }
}
