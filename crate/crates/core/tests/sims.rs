//! Cluster runs covering timing, failure and configuration edge cases.

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cisguard_core::detection::Outcome;
use cisguard_core::sim::{
    generate_listing, overhead_percent, Cluster, ClusterConfig, InstructionMix, LatencyModel,
    PatchError, ScheduledProcess, SimError, TamperPatch,
};
use cisguard_core::NodeId;

const LISTING: &str = "\
Decoding compiled method 0x00007f3c:
  0x10: push rbp
  0x11: mov rbp, rsp
  0x14: call 0x7f00aa
  0x19: test eax, eax
  0x1b: jne 0x30
  0x1d: call 0x7f00bb
  0x22: pop rbp
  0x23: ret
";

fn cluster(config: ClusterConfig) -> Cluster {
    Cluster::build(config).unwrap()
}

fn basic(pid: &str) -> ScheduledProcess {
    ScheduledProcess::replicated(pid, LISTING, NodeId(0), vec![NodeId(1), NodeId(2)], Duration::from_secs(20))
}

fn run(c: &mut Cluster) -> Vec<cisguard_core::sim::ProcessResult> {
    c.run_until_quiet(Duration::from_secs(120))
}

#[test]
fn late_worker_profile_is_held_then_answered() {
    let mut c = cluster(ClusterConfig::new(3, 3));
    let mut sp = basic("p");
    sp.profile_delay.insert(NodeId(2), Duration::from_secs(2));
    c.schedule_process(sp).unwrap();
    let r = run(&mut c).remove(0);
    assert_eq!(r.outcome, Outcome::NoAttack);
    assert!(c.trace().iter().any(|l| l.contains("n2 offer process=p held")));
}

#[test]
fn worker_that_never_profiles_in_time_is_flagged() {
    let mut c = cluster(ClusterConfig::new(3, 3));
    let mut sp = basic("p");
    sp.profile_delay.insert(NodeId(1), Duration::from_secs(30));
    c.schedule_process(sp).unwrap();
    let r = run(&mut c).remove(0);
    assert_eq!(r.outcome, Outcome::Attack);
    let alert = r.alert.unwrap();
    assert!(alert.missing_workers.contains(&NodeId(1)) || alert.unsafe_workers.contains(&NodeId(1)));
    assert!(!alert.unsafe_workers.contains(&NodeId(2)));
}

#[test]
fn worker_parse_failure_is_an_attack() {
    let mut c = cluster(ClusterConfig::new(3, 3));
    let mut sp = basic("p");
    sp.sources.insert(NodeId(2), "0x10:\n".into());
    c.schedule_process(sp).unwrap();
    let r = run(&mut c).remove(0);
    assert_eq!(r.outcome, Outcome::Attack);
    assert_eq!(c.node_errors("p")[0].0, NodeId(2));
}

#[test]
fn coordinator_parse_failure_leaves_everyone_missing() {
    let mut c = cluster(ClusterConfig::new(3, 3));
    let mut sp = basic("p");
    sp.sources.insert(NodeId(0), "0x10:\n".into());
    c.schedule_process(sp).unwrap();
    let r = run(&mut c).remove(0);
    assert_eq!(r.outcome, Outcome::Attack);
    assert_eq!(r.alert.unwrap().missing_workers, vec![NodeId(1), NodeId(2)]);
}

#[test]
fn alert_reaches_master() {
    let mut config = ClusterConfig::new(4, 3);
    config.master_node = Some(NodeId(3));
    let mut c = cluster(config);
    c.schedule_process(basic("p")).unwrap();
    c.inject_tamper(&TamperPatch::foo_call(NodeId(1), "p", 3)).unwrap();
    assert_eq!(run(&mut c)[0].outcome, Outcome::Attack);
    let received: Vec<&String> = c.trace().iter().filter(|l| l.contains("n3 alert received")).collect();
    assert_eq!(received.len(), 1);
    assert!(received[0].contains("\"unsafe_workers\":[1]"));
}

#[test]
fn single_copy_processes_pass_with_a_warning() {
    let mut c = cluster(ClusterConfig::new(2, 1));
    assert!(c.warnings()[0].starts_with("no workers"));
    c.schedule_process(ScheduledProcess::replicated("solo", LISTING, NodeId(1), vec![], Duration::from_secs(1)))
        .unwrap();
    assert_eq!(run(&mut c)[0].outcome, Outcome::NoAttack);
}

#[test]
fn keys_survive_rotation_in_flight_only_with_history() {
    // deliveries take longer than a rotation period
    let slow = |depth| {
        let mut config = ClusterConfig::new(3, 3);
        config.latency = LatencyModel::Fixed { ms: 1500 };
        config.key_history_depth = depth;
        let mut c = cluster(config);
        c.schedule_process(basic("p")).unwrap();
        run(&mut c).remove(0)
    };
    assert_eq!(slow(3).outcome, Outcome::NoAttack);
    let r = slow(1);
    assert_eq!(r.outcome, Outcome::Attack);
    assert_eq!(r.alert.unwrap().missing_workers, vec![NodeId(1), NodeId(2)]);
}

#[test]
fn every_offer_gets_one_answer() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut config = ClusterConfig::new(5, 3);
    config.latency = LatencyModel::Uniform { min_ms: 1, max_ms: 900 };
    let mut c = cluster(config);
    for i in 0..20u32 {
        let text = generate_listing(200, InstructionMix::default(), &mut rng).text;
        let p = i % 5;
        let mut sp = ScheduledProcess::replicated(
            format!("q{i}"),
            &text,
            NodeId(p),
            vec![NodeId((p + 1) % 5), NodeId((p + 3) % 5)],
            Duration::from_secs(5),
        );
        sp.start_at = Duration::from_millis(u64::from(i) * 170);
        if i % 4 == 0 {
            sp.profile_delay.insert(NodeId((p + 1) % 5), Duration::from_secs(3));
        }
        c.schedule_process(sp).unwrap();
    }
    let results = run(&mut c);
    assert!(results.iter().all(|r| r.outcome == Outcome::NoAttack));
    for i in 0..20 {
        let offers = c.trace().iter().filter(|l| l.contains(&format!("offer process=q{i} to="))).count();
        let answers = c.trace().iter().filter(|l| l.contains(&format!("confirm process=q{i} "))).count();
        assert_eq!((offers, answers), (2, 2), "q{i}");
    }
}

#[test]
fn modeled_metrics_are_positive_and_consistent() {
    let mut c = cluster(ClusterConfig::new(3, 3));
    c.schedule_process(basic("p")).unwrap();
    run(&mut c);
    let report = c.report_metrics().unwrap();
    let p = &report.processes[0];
    assert!(p.time_detect_s > 0.0);
    assert_eq!(p.timing, "modeled");
    assert_eq!(p.cfi_count, 4);
    assert_eq!(p.total_instructions, 8);
    assert_eq!(p.overhead_percent, overhead_percent(p.time_detect_s, 20.0));
    assert_eq!(p.overhead_percent.unwrap(), 100.0 * p.time_detect_s / 20.0);
}

#[test]
fn same_seed_same_trace_other_seed_differs() {
    let go = |seed| {
        let mut config = ClusterConfig::new(4, 3);
        config.rng_seed = seed;
        config.latency = LatencyModel::Uniform { min_ms: 1, max_ms: 50 };
        let mut c = cluster(config);
        for i in 0..4 {
            let mut sp = basic(&format!("p{i}"));
            sp.start_at = Duration::from_millis(i * 3);
            c.schedule_process(sp).unwrap();
        }
        run(&mut c);
        c.trace().to_vec()
    };
    assert_eq!(go(5), go(5));
    assert_ne!(go(5), go(6));
}

#[test]
fn run_for_rotates_once_per_period() {
    let mut c = cluster(ClusterConfig::new(3, 2));
    c.run_for(Duration::from_millis(3500));
    assert_eq!(c.rotations(NodeId(0)), Some(3));
    assert_eq!(c.now(), Duration::from_millis(3500));
    assert_eq!(c.channel(NodeId(0)).unwrap().current_epoch(), 4);
}

#[test]
fn schedule_rejects_bad_processes() {
    let mut c = cluster(ClusterConfig::new(4, 3));
    c.schedule_process(basic("p")).unwrap();
    assert_eq!(c.schedule_process(basic("p")), Err(SimError::DuplicateProcess("p".into())));

    let mut sp = basic("q");
    sp.replicas = vec![NodeId(0), NodeId(1)];
    assert!(matches!(c.schedule_process(sp), Err(SimError::InvalidProcess(..))));

    let mut sp = basic("q");
    sp.replicas = vec![NodeId(1)];
    assert!(matches!(c.schedule_process(sp), Err(SimError::InvalidProcess(..))));

    let mut sp = basic("q");
    sp.replicas = vec![NodeId(1), NodeId(9)];
    assert_eq!(c.schedule_process(sp), Err(SimError::UnknownNode(NodeId(9))));

    let mut sp = basic("q");
    sp.sources.remove(&NodeId(2));
    assert!(matches!(c.schedule_process(sp), Err(SimError::InvalidProcess(..))));
}

#[test]
fn tamper_rejections() {
    let mut c = cluster(ClusterConfig::new(4, 3));
    c.schedule_process(basic("p")).unwrap();
    assert_eq!(
        c.inject_tamper(&TamperPatch::foo_call(NodeId(7), "p", 0)),
        Err(SimError::UnknownNode(NodeId(7)))
    );
    assert_eq!(
        c.inject_tamper(&TamperPatch::foo_call(NodeId(1), "zz", 0)),
        Err(SimError::UnknownProcess("zz".into()))
    );
    assert!(matches!(
        c.inject_tamper(&TamperPatch::foo_call(NodeId(3), "p", 0)),
        Err(SimError::NotHosting { .. })
    ));
    assert_eq!(
        c.inject_tamper(&TamperPatch::new(NodeId(1), "p").delete(99)),
        Err(SimError::Patch(PatchError::PositionOutOfRange { pos: 99, len: 9 }))
    );
    run(&mut c);
    assert_eq!(
        c.inject_tamper(&TamperPatch::foo_call(NodeId(1), "p", 0)),
        Err(SimError::AlreadyStarted("p".into()))
    );
}

#[test]
fn nothing_completed_is_an_error() {
    let c = cluster(ClusterConfig::new(3, 3));
    assert_eq!(c.report_metrics().unwrap_err(), SimError::NoCompletedProcesses);
    assert!(matches!(Cluster::build(ClusterConfig::new(2, 3)), Err(SimError::InvalidConfig(_))));
}
