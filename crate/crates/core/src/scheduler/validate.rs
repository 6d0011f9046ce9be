use std::collections::HashMap;

use super::{CompletionRule, Instance, Schedule, SchedulePhase, SchedulerOptions, TaskNode};
use crate::error::{Error, Result};

const TOL: f64 = 1e-9;

/// Checks a schedule against the instance it claims to solve: the operator
/// serves one phase at a time inside the window, each task's phases follow
/// its agent work in order, dependencies are reviewed before dependents are
/// planned, and the reported objective matches the credited tasks.
pub fn validate_schedule(
    nodes: &[TaskNode],
    window_length: f64,
    opts: &SchedulerOptions,
    schedule: &Schedule,
) -> Result<()> {
    let inst = Instance::build(nodes, window_length, opts)?;
    let fail = |msg: String| Err(Error::InvalidParameter(format!("infeasible schedule: {msg}")));
    let index: HashMap<&str, usize> = inst
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut operator: Vec<(f64, f64)> = Vec::new();
    let mut phases: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); inst.len()];
    for iv in &schedule.intervals {
        let Some(&k) = index.get(iv.task.as_str()) else {
            return fail(format!("unknown task `{}`", iv.task));
        };
        if iv.end < iv.start {
            return fail(format!("interval of `{}` ends before it starts", iv.task));
        }
        if !iv.phase.is_operator() {
            continue;
        }
        if iv.start < -TOL || iv.end > inst.window + TOL {
            return fail(format!("operator phase of `{}` leaves the window", iv.task));
        }
        let q = match iv.phase {
            SchedulePhase::Planning => 0,
            SchedulePhase::Interrupt => iv.index + 1,
            _ => inst.ops[k].len() - 1,
        };
        operator.push((iv.start, iv.end));
        phases[k].push((q, iv.start, iv.end));
    }
    operator.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in operator.windows(2) {
        if pair[1].0 < pair[0].1 - TOL {
            return fail(format!("operator phases overlap at {}", pair[1].0));
        }
    }

    let mut finished: Vec<Option<f64>> = vec![None; inst.len()];
    let mut credited = vec![false; inst.len()];
    let mut launched: Vec<Option<f64>> = vec![None; inst.len()];
    for k in 0..inst.len() {
        let ps = &mut phases[k];
        ps.sort_by_key(|p| p.0);
        let last = inst.ops[k].len() - 1;
        for (expected, &(q, start, end)) in ps.iter().enumerate() {
            if q != expected {
                return fail(format!("`{}` serves its phases out of order", inst.ids[k]));
            }
            if (end - start - inst.ops[k][q]).abs() > TOL {
                return fail(format!("`{}` phase {q} has the wrong duration", inst.ids[k]));
            }
            if q > 0 {
                let resume = ps[q - 1].2 + inst.segs[k][q - 1];
                if start < resume - TOL {
                    return fail(format!("`{}` phase {q} starts before its agent work ends", inst.ids[k]));
                }
            }
            if q < last && q == inst.last_interrupt_phase(k) {
                let done = end + inst.segs[k][q];
                if inst.rule == CompletionRule::AgentComplete && done <= inst.window + TOL {
                    credited[k] = true;
                }
            }
            if q == last {
                finished[k] = Some(end);
                if inst.rule == CompletionRule::ReviewEnd && end <= inst.window + TOL {
                    credited[k] = true;
                }
            }
        }
        launched[k] = ps.first().map(|p| p.2);
    }
    for k in 0..inst.len() {
        let Some(&(_, plan_start, _)) = phases[k].first() else {
            continue;
        };
        for &d in &inst.deps[k] {
            match finished[d] {
                Some(t) if plan_start >= t - TOL => {}
                _ => {
                    return fail(format!(
                        "`{}` planned before dependency `{}` was reviewed",
                        inst.ids[k], inst.ids[d]
                    ))
                }
            }
            if let (Some(a), Some(b)) = (launched[k], launched[d]) {
                if a < b + nodes[d].t_agent - TOL {
                    return fail(format!("`{}` dispatched before `{}` finished its run", inst.ids[k], inst.ids[d]));
                }
            }
        }
    }
    let objective = inst.credited_value(&credited);
    if (objective - schedule.objective).abs() > TOL * (1.0 + objective.abs()) {
        return fail(format!(
            "reported objective {} but credited tasks sum to {objective}",
            schedule.objective
        ));
    }
    Ok(())
}
