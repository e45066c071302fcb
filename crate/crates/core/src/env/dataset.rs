use std::io::{Read, Write};

use rand::RngCore;

use super::{ContinuousEnv, EnvKind, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::seeding::{indexed_rng, Stream};

/// Runs one full episode with `actor` choosing actions from observations.
pub fn rollout<F>(env: &mut dyn ContinuousEnv, rng: &mut dyn RngCore, mut actor: F) -> Trajectory
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut obs = env.reset(rng);
    let mut traj = Trajectory::default();
    for _ in 0..env.horizon() {
        let a = actor(&obs);
        let tr = env.step(&a);
        obs = tr.next_state.clone();
        let done = tr.done;
        traj.push(tr);
        if done {
            break;
        }
    }
    traj
}

/// Scripted-expert demonstrations; episode `i` draws its initial noise from
/// its own sub-stream of `seed`.
pub fn generate_expert_dataset(kind: EnvKind, n_trajectories: usize, seed: u64) -> Result<Vec<Trajectory>> {
    if n_trajectories == 0 {
        return Err(Error::contract("need at least one expert trajectory"));
    }
    let mut env = kind.make();
    let mut out = Vec::with_capacity(n_trajectories);
    for i in 0..n_trajectories {
        let mut rng = indexed_rng(seed, Stream::Expert, i as u32);
        let traj = {
            let env_ref: &mut dyn ContinuousEnv = env.as_mut();
            let expert = |obs: &[f64]| super::scripted_expert(kind, obs).expect("observation matches env");
            rollout(env_ref, &mut rng, expert)
        };
        out.push(traj);
    }
    Ok(out)
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with header `episode,t,s0..,a0..,reward,done`, 17 significant digits.
pub fn write_trajectories_csv<W: Write>(trajectories: &[Trajectory], out: W) -> Result<()> {
    let first = trajectories
        .iter()
        .find_map(|t| t.transitions.first())
        .ok_or_else(|| Error::contract("no transitions to write"))?;
    let (sd, ad) = (first.state.len(), first.action.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["episode".to_string(), "t".to_string()];
    header.extend((0..sd).map(|i| format!("s{i}")));
    header.extend((0..ad).map(|i| format!("a{i}")));
    header.push("reward".into());
    header.push("done".into());
    w.write_record(&header)?;
    for (ep, traj) in trajectories.iter().enumerate() {
        for (t, tr) in traj.transitions.iter().enumerate() {
            let mut row = vec![ep.to_string(), t.to_string()];
            row.extend(tr.state.iter().map(|&v| fmt17(v)));
            row.extend(tr.action.iter().map(|&v| fmt17(v)));
            row.push(fmt17(tr.reward_env));
            row.push(u8::from(tr.done).to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the format written by [`write_trajectories_csv`]. Next states are
/// rebuilt from the following row of the same episode (the final row reuses
/// its own state, as the file does not store it).
pub fn read_trajectories_csv<R: Read>(input: R) -> Result<Vec<Trajectory>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    let sd = headers.iter().filter(|h| h.starts_with('s')).count();
    let ad = headers.iter().filter(|h| h.starts_with('a')).count();
    if headers.len() != 4 + sd + ad {
        return Err(Error::Format("unexpected trajectory CSV header".into()));
    }
    let parse = |s: &str| -> Result<f64> { s.parse::<f64>().map_err(|e| Error::Format(format!("{s}: {e}"))) };
    let mut trajs: Vec<Trajectory> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let ep: usize = rec[0].parse().map_err(|_| Error::Format("bad episode index".into()))?;
        let state = (0..sd).map(|i| parse(&rec[2 + i])).collect::<Result<Vec<_>>>()?;
        let action = (0..ad).map(|i| parse(&rec[2 + sd + i])).collect::<Result<Vec<_>>>()?;
        let reward = parse(&rec[2 + sd + ad])?;
        let done = &rec[3 + sd + ad] == "1";
        while trajs.len() <= ep {
            trajs.push(Trajectory::default());
        }
        let traj = &mut trajs[ep];
        if let Some(prev) = traj.transitions.last_mut() {
            prev.next_state = state.clone();
        }
        traj.push(Transition {
            next_state: state.clone(),
            state,
            action,
            reward_env: reward,
            done,
        });
    }
    Ok(trajs)
}
