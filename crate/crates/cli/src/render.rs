//! Table and JSON output for each command.

use std::fmt::Write;

use cisguard_core::api::{ClassDelta, DiffResponse, ProfileResponse, StatsResponse};
use cisguard_core::cis::CfiStats;
use cisguard_core::detection::{Outcome, Verdict};
use cisguard_core::sim::ScenarioOutcome;
use cisguard_core::NodeId;
use serde::Serialize;

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("response types serialize");
    s.push('\n');
    s
}

fn nodes(ids: &[NodeId]) -> String {
    if ids.is_empty() {
        return "-".into();
    }
    ids.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn stats_row(out: &mut String, name: &str, s: &CfiStats) {
    let _ = writeln!(
        out,
        "{name:<32} {:>8} {:>6} {:>6} {:>6} {:>6} {:>7.2}%",
        s.total_instructions,
        s.cfi_count,
        s.jump_count,
        s.call_count,
        s.return_count,
        100.0 * s.cfi_fraction
    );
}

fn stats_header(out: &mut String) {
    let _ = writeln!(
        out,
        "{:<32} {:>8} {:>6} {:>6} {:>6} {:>6} {:>8}",
        "file", "instrs", "cfi", "jumps", "calls", "rets", "cfi%"
    );
}

pub fn profile(resp: &ProfileResponse, as_json: bool) -> String {
    if as_json {
        return json(resp);
    }
    let fp = &resp.fingerprint;
    let mut out = String::new();
    let _ = writeln!(out, "process   {}", resp.process_id);
    let _ = writeln!(out, "combined  {}", fp.combined);
    let _ = writeln!(out, "jumps     {}  ({} tokens)", fp.jump_digest, resp.cis.jumps.len());
    let _ = writeln!(out, "calls     {}  ({} tokens)", fp.call_digest, resp.cis.calls.len());
    let _ = writeln!(out, "returns   {}  ({} tokens)", fp.return_digest, resp.cis.returns.len());
    let s = &resp.stats;
    let _ = writeln!(
        out,
        "mix       {} instructions, {} control ({:.2}%): {} jumps, {} calls, {} returns",
        s.total_instructions,
        s.cfi_count,
        100.0 * s.cfi_fraction,
        s.jump_count,
        s.call_count,
        s.return_count
    );
    out
}

pub fn stats(resp: &StatsResponse, as_json: bool) -> String {
    if as_json {
        return json(resp);
    }
    let mut out = String::new();
    stats_header(&mut out);
    for f in &resp.files {
        stats_row(&mut out, &f.name, &f.stats);
    }
    if resp.files.len() > 1 {
        stats_row(&mut out, "(pooled)", &resp.pooled);
    }
    out
}

fn delta_row(out: &mut String, name: &str, d: &ClassDelta) {
    let _ = writeln!(out, "  {name:<8} {:>6} -> {:<6} ({:+})", d.a, d.b, d.delta);
}

pub fn diff(resp: &DiffResponse, as_json: bool) -> String {
    if as_json {
        return json(resp);
    }
    let mut out = String::new();
    match resp.verdict {
        Verdict::Safe => {
            let _ = writeln!(out, "safe  {}", resp.a.combined);
        }
        Verdict::Unsafe => {
            let _ = writeln!(out, "unsafe  {} != {}", resp.a.combined, resp.b.combined);
            delta_row(&mut out, "jumps", &resp.jumps);
            delta_row(&mut out, "calls", &resp.calls);
            delta_row(&mut out, "returns", &resp.returns);
        }
    }
    out
}

fn outcome_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Pending => "pending",
        Outcome::NoAttack => "no_attack",
        Outcome::Attack => "ATTACK",
    }
}

pub fn run(outcome: &ScenarioOutcome, as_json: bool, with_trace: bool) -> String {
    if as_json {
        if with_trace {
            return json(outcome);
        }
        let mut trimmed = outcome.clone();
        trimmed.trace.clear();
        return json(&trimmed);
    }
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:<10} {:<10} {:<10}", "process", "outcome", "unsafe", "missing");
    for r in &outcome.results {
        let (bad, missing) = r
            .alert
            .as_ref()
            .map_or((&[][..], &[][..]), |a| (&a.unsafe_workers[..], &a.missing_workers[..]));
        let _ = writeln!(
            out,
            "{:<24} {:<10} {:<10} {:<10}",
            r.process_id,
            outcome_label(r.outcome),
            nodes(bad),
            nodes(missing)
        );
    }
    if let Some(report) = &outcome.report {
        let a = &report.aggregate;
        let _ = writeln!(out);
        let _ = writeln!(out, "processes        {}", a.processes);
        let _ = writeln!(out, "attacks          {}", a.attacks);
        let _ = writeln!(out, "mean overhead    {}%", pct(a.mean_overhead_percent));
        let _ = writeln!(out, "pooled overhead  {}%", pct(a.ratio_of_means_overhead_percent));
        if let Some(fit) = &a.fit {
            let _ = writeln!(
                out,
                "detect fit       t = {:.3e} * n + {:.3e}  (r2 {:.4})",
                fit.slope, fit.intercept, fit.r2
            );
        }
    }
    if with_trace {
        let _ = writeln!(out);
        for line in &outcome.trace {
            let _ = writeln!(out, "{line}");
        }
    }
    out
}
