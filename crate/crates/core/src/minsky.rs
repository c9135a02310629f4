//! Minsky machines: simulation, bounded equivalence closure, and the glass and
//! cycle extensions used to build group presentations from machines.

use std::collections::{BTreeMap, HashSet, VecDeque};

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    Add,
    Sub,
    EmptyCheck,
    Stop,
}

/// A command `from; guard → to; action`. Glass indices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Command {
    pub kind: CommandKind,
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub glasses: Vec<usize>,
}

impl Command {
    pub fn add(from: usize, to: usize, glasses: &[usize]) -> Self {
        Command { kind: CommandKind::Add, from, to, glasses: glasses.to_vec() }
    }

    pub fn sub(from: usize, to: usize, glasses: &[usize]) -> Self {
        Command { kind: CommandKind::Sub, from, to, glasses: glasses.to_vec() }
    }

    pub fn empty_check(from: usize, to: usize, glasses: &[usize]) -> Self {
        Command { kind: CommandKind::EmptyCheck, from, to, glasses: glasses.to_vec() }
    }

    pub fn stop(from: usize) -> Self {
        Command { kind: CommandKind::Stop, from, to: 0, glasses: Vec::new() }
    }

    /// Glasses that must be nonempty and empty for the command to apply.
    fn guard(&self) -> (&[usize], &[usize]) {
        match self.kind {
            CommandKind::Sub => (&self.glasses, &[]),
            CommandKind::EmptyCheck => (&[], &self.glasses),
            CommandKind::Add | CommandKind::Stop => (&[], &[]),
        }
    }

    pub fn applies_to(&self, c: &Configuration) -> bool {
        if c.state != self.from {
            return false;
        }
        let (pos, zero) = self.guard();
        pos.iter().all(|&g| !c.coins[g - 1].is_zero()) && zero.iter().all(|&g| c.coins[g - 1].is_zero())
    }

    /// Result of applying the command; the caller checks the guard.
    fn apply(&self, c: &Configuration) -> Configuration {
        let mut coins = c.coins.clone();
        match self.kind {
            CommandKind::Add => {
                for &g in &self.glasses {
                    coins[g - 1] += 1u32;
                }
            }
            CommandKind::Sub => {
                for &g in &self.glasses {
                    coins[g - 1] -= 1u32;
                }
            }
            CommandKind::EmptyCheck | CommandKind::Stop => {}
        }
        Configuration { state: self.to, coins }
    }

    /// The configuration this command maps onto `c`, if any.
    fn preimage(&self, c: &Configuration) -> Option<Configuration> {
        if c.state != self.to {
            return None;
        }
        let mut coins = c.coins.clone();
        match self.kind {
            CommandKind::Add => {
                for &g in &self.glasses {
                    if coins[g - 1].is_zero() {
                        return None;
                    }
                    coins[g - 1] -= 1u32;
                }
            }
            CommandKind::Sub => {
                for &g in &self.glasses {
                    coins[g - 1] += 1u32;
                }
            }
            CommandKind::EmptyCheck | CommandKind::Stop => {}
        }
        let pre = Configuration { state: self.from, coins };
        self.applies_to(&pre).then_some(pre)
    }
}

/// `(state; n_1, …, n_k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub state: usize,
    pub coins: Vec<BigUint>,
}

impl Configuration {
    pub fn new(state: usize, coins: &[u64]) -> Self {
        Configuration { state, coins: coins.iter().map(|&c| BigUint::from(c)).collect() }
    }

    /// `(1; n, 0, …, 0)`.
    pub fn input(n: u64, glasses: usize) -> Self {
        let mut coins = vec![BigUint::zero(); glasses];
        coins[0] = BigUint::from(n);
        Configuration { state: 1, coins }
    }

    /// `(0; 0, …, 0)`.
    pub fn accept(glasses: usize) -> Self {
        Configuration { state: 0, coins: vec![BigUint::zero(); glasses] }
    }
}

/// A `k`-glass machine on states `0..states`; 0 halts and 1 starts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinskyMachine {
    pub glasses: usize,
    pub states: usize,
    pub commands: Vec<Command>,
    /// Display names of states introduced by extensions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub names: BTreeMap<usize, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Accepted(u64),
    Stuck(Configuration),
    Timeout,
}

impl MinskyMachine {
    pub fn new(glasses: usize, states: usize, commands: Vec<Command>) -> Result<Self> {
        let m = MinskyMachine { glasses, states, commands, names: BTreeMap::new() };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |i: usize, why: &str| Err(Error::InvalidMachine(format!("command {i}: {why}")));
        if self.glasses == 0 {
            return Err(Error::InvalidMachine("at least one glass is required".into()));
        }
        if self.states < 2 {
            return Err(Error::InvalidMachine("states 0 and 1 are required".into()));
        }
        for (i, c) in self.commands.iter().enumerate() {
            if c.from == 0 {
                return bad(i, "no command may leave the halt state");
            }
            if c.from >= self.states || c.to >= self.states {
                return bad(i, "state out of range");
            }
            match c.kind {
                CommandKind::Stop => {
                    if !c.glasses.is_empty() {
                        return bad(i, "Stop names no glasses");
                    }
                }
                _ => {
                    if c.glasses.is_empty() {
                        return bad(i, "glass list is empty");
                    }
                    if c.glasses.iter().any(|&g| g == 0 || g > self.glasses) {
                        return bad(i, "glass out of range");
                    }
                    if c.glasses.windows(2).any(|w| w[0] >= w[1]) {
                        return bad(i, "glasses must be strictly increasing");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn applicable_commands(&self, c: &Configuration) -> Vec<&Command> {
        self.commands.iter().filter(|cmd| cmd.applies_to(c)).collect()
    }

    /// First pair of commands whose guards can hold simultaneously.
    pub fn overlapping_pair(&self) -> Option<(usize, usize)> {
        for (i, a) in self.commands.iter().enumerate() {
            for (j, b) in self.commands.iter().enumerate().skip(i + 1) {
                if a.from != b.from {
                    continue;
                }
                let (pa, za) = a.guard();
                let (pb, zb) = b.guard();
                let clash = pa.iter().chain(pb).any(|g| za.contains(g) || zb.contains(g));
                if !clash {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_deterministic(&self) -> bool {
        self.overlapping_pair().is_none()
    }

    /// Simulates from `(1; input, 0, …, 0)` for at most `max_steps` commands.
    pub fn run(&self, input: u64, max_steps: u64) -> Result<RunOutcome> {
        if let Some((i, j)) = self.overlapping_pair() {
            return Err(Error::NondeterministicMachine(i, j));
        }
        let accept = Configuration::accept(self.glasses);
        let mut c = Configuration::input(input, self.glasses);
        let mut steps = 0;
        loop {
            if c == accept {
                return Ok(RunOutcome::Accepted(steps));
            }
            let Some(cmd) = self.commands.iter().find(|cmd| cmd.applies_to(&c)) else {
                return Ok(RunOutcome::Stuck(c));
            };
            if steps == max_steps {
                return Ok(RunOutcome::Timeout);
            }
            c = cmd.apply(&c);
            steps += 1;
        }
    }

    /// Configurations one command or inverse command away from `c`.
    pub fn equivalence_neighbors(&self, c: &Configuration) -> Vec<Configuration> {
        let mut out = Vec::new();
        for cmd in &self.commands {
            if cmd.applies_to(c) {
                out.push(cmd.apply(c));
            }
            if let Some(pre) = cmd.preimage(c) {
                out.push(pre);
            }
        }
        out
    }

    /// Everything reachable from `c` within `bound` forward or inverse steps.
    pub fn equivalence_closure(&self, c: &Configuration, bound: usize) -> HashSet<Configuration> {
        let mut seen = HashSet::from([c.clone()]);
        let mut queue = VecDeque::from([(c.clone(), 0usize)]);
        while let Some((cur, depth)) = queue.pop_front() {
            if depth == bound {
                continue;
            }
            for next in self.equivalence_neighbors(&cur) {
                if seen.insert(next.clone()) {
                    queue.push_back((next, depth + 1));
                }
            }
        }
        seen
    }

    fn fresh_states(&mut self, labels: &[&str]) -> Vec<usize> {
        let first = self.states;
        self.states += labels.len();
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                self.names.insert(first + i, l.to_string());
                first + i
            })
            .collect()
    }

    pub fn state_name(&self, s: usize) -> String {
        self.names.get(&s).cloned().unwrap_or_else(|| s.to_string())
    }

    /// Adds one glass that records the input so non-accepted inputs stay isolated
    /// under equivalence. Requires `k ≥ 2` because the copy step adds to glasses 2
    /// and `k+1` simultaneously.
    pub fn add_glass_extension(&self) -> Result<MinskyMachine> {
        if let Some((i, j)) = self.overlapping_pair() {
            return Err(Error::NondeterministicMachine(i, j));
        }
        let k = self.glasses;
        if k < 2 {
            return Err(Error::InvalidArgument("glass extension needs at least two glasses".into()));
        }
        let mut out = self.clone();
        out.glasses = k + 1;
        let ids = out.fresh_states(&["0'", "1'", "2'", "3'", "4'", "5'", "6'"]);
        let (z, o, s2, s3, s4, s5, s6) = (ids[0], ids[1], ids[2], ids[3], ids[4], ids[5], ids[6]);
        let rename = |s: usize| match s {
            0 => z,
            1 => o,
            _ => s,
        };
        for cmd in &mut out.commands {
            cmd.from = rename(cmd.from);
            cmd.to = rename(cmd.to);
        }
        let upper: Vec<usize> = (2..=k + 1).collect();
        let lower: Vec<usize> = (1..=k).collect();
        out.commands.extend([
            Command::empty_check(1, s2, &upper),
            Command::sub(s2, s3, &[1]),
            Command::add(s3, s2, &[2, k + 1]),
            Command::empty_check(s2, s4, &[1]),
            Command::sub(s4, s5, &[2]),
            Command::add(s5, s4, &[1]),
            Command::empty_check(s4, o, &[2]),
            Command::empty_check(z, s6, &lower),
            Command::sub(s6, s6, &[k + 1]),
            Command::empty_check(s6, 0, &[k + 1]),
        ]);
        out.validate()?;
        Ok(out)
    }

    /// Adds states `2′…p′` and a cycle from state 1 that deposits `p` coins in glass 1.
    pub fn p_cycle_extension(&self, p: usize) -> Result<MinskyMachine> {
        if p < 2 {
            return Err(Error::InvalidArgument("cycle length must be at least 2".into()));
        }
        let mut out = self.clone();
        let labels: Vec<String> = (2..=p).map(|i| format!("{i}'")).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let ids = out.fresh_states(&refs);
        out.commands.push(Command::add(1, ids[0], &[1]));
        for w in ids.windows(2) {
            out.commands.push(Command::add(w[0], w[1], &[1]));
        }
        out.commands.push(Command::add(ids[p - 2], 1, &[1]));
        out.validate()?;
        Ok(out)
    }
}

pub fn mod_pow(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = (r as u128 * b as u128 % m as u128) as u64;
        }
        b = (b as u128 * b as u128 % m as u128) as u64;
        e >>= 1;
    }
    r
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Multiplicative order of `r` modulo `p`, by repeated multiplication.
pub fn multiplicative_order(r: u64, p: u64) -> Option<u64> {
    if r % p == 0 {
        return None;
    }
    let mut x = r % p;
    let mut k = 1;
    while x != 1 % p {
        x = (x as u128 * r as u128 % p as u128) as u64;
        k += 1;
        if k > p {
            return None;
        }
    }
    Some(k)
}

pub fn is_primitive_root(r: u64, p: u64) -> bool {
    multiplicative_order(r, p) == Some(p - 1)
}

/// `a` with `r^a ≡ j (mod p)`.
pub fn discrete_log(r: u64, j: u64, p: u64) -> Option<u64> {
    (0..p - 1).find(|&a| mod_pow(r, a, p) == j % p)
}

/// The `n`-th prime above `r` that has `r` as a primitive root.
pub fn prime_sequence(r: u64, n: usize) -> u64 {
    assert!(n >= 1, "sequence is 1-indexed");
    (r + 1..)
        .filter(|&q| is_prime(q) && is_primitive_root(r, q))
        .nth(n - 1)
        .expect("unbounded scan")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain() -> MinskyMachine {
        MinskyMachine::new(
            3,
            3,
            vec![Command::sub(1, 1, &[1]), Command::empty_check(1, 2, &[1]), Command::stop(2)],
        )
        .unwrap()
    }

    #[test]
    fn guards_select_commands() {
        let m = drain();
        let c = Configuration::new(1, &[3, 0, 0]);
        let a = m.applicable_commands(&c);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].kind, CommandKind::Sub);
        let e = m.applicable_commands(&Configuration::new(1, &[0, 0, 0]));
        assert_eq!(e[0].kind, CommandKind::EmptyCheck);
        assert!(m.applicable_commands(&Configuration::new(0, &[0, 0, 0])).is_empty());
    }

    #[test]
    fn determinism_detection() {
        assert!(drain().is_deterministic());
        let two_stops = MinskyMachine::new(1, 2, vec![Command::stop(1), Command::stop(1)]).unwrap();
        assert!(!two_stops.is_deterministic());
        let mixed =
            MinskyMachine::new(1, 4, vec![Command::add(1, 2, &[1]), Command::sub(1, 3, &[1])]).unwrap();
        assert!(!mixed.is_deterministic());
        assert!(matches!(mixed.run(0, 10), Err(Error::NondeterministicMachine(0, 1))));
    }

    #[test]
    fn drain_runs() {
        let m = drain();
        assert_eq!(m.run(5, 100).unwrap(), RunOutcome::Accepted(7));
        assert_eq!(m.run(0, 100).unwrap(), RunOutcome::Accepted(2));
        assert_eq!(m.run(5, 3).unwrap(), RunOutcome::Timeout);
        let dead = MinskyMachine::new(1, 2, vec![]).unwrap();
        assert!(matches!(dead.run(0, 10).unwrap(), RunOutcome::Stuck(_)));
    }

    #[test]
    fn closure_of_drain() {
        let m = drain();
        let c = Configuration::new(1, &[1, 0, 0]);
        assert_eq!(m.equivalence_closure(&c, 0).len(), 1);
        let cl = m.equivalence_closure(&c, 3);
        for want in [[0, 0, 0], [2, 0, 0]] {
            assert!(cl.contains(&Configuration::new(1, &want)));
        }
        assert!(cl.contains(&Configuration::new(2, &[0, 0, 0])));
        assert!(cl.contains(&Configuration::new(0, &[0, 0, 0])));
    }

    #[test]
    fn glass_extension_shape() {
        let m = drain();
        let e = m.add_glass_extension().unwrap();
        assert_eq!(e.glasses, 4);
        assert_eq!(e.states, m.states + 7);
        assert_eq!(e.commands.len(), m.commands.len() + 10);
        assert!(e.is_deterministic());
        assert!(matches!(e.run(3, 10_000).unwrap(), RunOutcome::Accepted(_)));
        let one = MinskyMachine::new(1, 2, vec![Command::stop(1)]).unwrap();
        assert!(one.add_glass_extension().is_err());
    }

    #[test]
    fn cycle_extension_shape() {
        let m = drain();
        let e = m.p_cycle_extension(3).unwrap();
        assert_eq!(e.states, m.states + 2);
        assert_eq!(e.commands.len(), m.commands.len() + 3);
        assert!(!e.is_deterministic());
        assert_eq!(e.applicable_commands(&Configuration::new(1, &[2, 0, 0])).len(), 2);
        let mut c = Configuration::input(0, 3);
        let cycle = &e.commands[m.commands.len()..];
        for cmd in cycle {
            assert!(cmd.applies_to(&c));
            c = cmd.apply(&c);
        }
        assert_eq!(c, Configuration::new(1, &[3, 0, 0]));
    }

    #[test]
    fn primitive_roots() {
        assert!(is_primitive_root(2, 3));
        assert!(!is_primitive_root(2, 7));
        assert!(is_primitive_root(2, 11));
        assert_eq!(prime_sequence(2, 1), 3);
        assert_eq!(prime_sequence(2, 2), 5);
        assert_eq!(prime_sequence(2, 3), 11);
        assert_eq!(discrete_log(2, 3, 5), Some(3));
    }
}
