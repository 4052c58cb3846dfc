//! Line-oriented scenario files: `[section]` headers over `key = value`
//! lines, `#` comments. The full schema is documented in the README.

use std::fmt;

use num_complex::Complex64;

use darboux_core::config::Tolerances;
use darboux_core::expr::{parse, Expr};
use darboux_core::grid::Grid;
use darboux_core::hamiltonian::{AssociationChain, VectorFunction};
use darboux_core::linalg::CMatrix;

/// Scenario validation failure. Rendering it and exiting with code 2 is
/// the caller's job.
#[derive(Debug)]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError { line, message: message.into() })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Command {
    VerifyChains,
    Build,
    FinalPotential,
    VerifyIntertwining,
    Minimize,
    Conjugate,
    Susy,
    Reduce,
    SamplePotential,
}

pub const CANONICAL_ORDER: [Command; 9] = [
    Command::VerifyChains,
    Command::Build,
    Command::FinalPotential,
    Command::VerifyIntertwining,
    Command::Minimize,
    Command::Conjugate,
    Command::Susy,
    Command::Reduce,
    Command::SamplePotential,
];

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyChains => "verify-chains",
            Command::Build => "build",
            Command::FinalPotential => "final-potential",
            Command::VerifyIntertwining => "verify-intertwining",
            Command::Minimize => "minimize",
            Command::Conjugate => "conjugate",
            Command::Susy => "susy",
            Command::Reduce => "reduce",
            Command::SamplePotential => "sample-potential",
        }
    }

    fn from_name(s: &str) -> Option<Command> {
        CANONICAL_ORDER.iter().copied().find(|c| c.name() == s)
    }

    fn canonical_index(self) -> usize {
        CANONICAL_ORDER.iter().position(|&c| c == self).unwrap()
    }

    /// Commands whose artifacts this command consumes.
    fn dependencies(self) -> &'static [Command] {
        match self {
            Command::VerifyChains | Command::Build => &[],
            Command::FinalPotential => &[Command::Build],
            Command::VerifyIntertwining => &[Command::FinalPotential],
            Command::Minimize => &[Command::Build],
            Command::Conjugate => &[Command::Build, Command::FinalPotential],
            Command::Susy => &[Command::Conjugate],
            Command::Reduce => &[Command::Build],
            Command::SamplePotential => &[Command::FinalPotential],
        }
    }
}

pub struct Scenario {
    pub name: String,
    pub n: usize,
    /// Intertwiner order N; the chain sections must carry n·N members.
    pub order: usize,
    pub seed: u64,
    pub window: Grid,
    pub tol: Tolerances,
    pub potential: Vec<Vec<Expr>>,
    pub leading: CMatrix,
    pub chains: Vec<AssociationChain>,
    pub extension: Vec<AssociationChain>,
    pub no_lower_order: bool,
    pub commands: Vec<Command>,
}

struct RawChain {
    line: usize,
    lambda: Option<Complex64>,
    members: Vec<VectorFunction>,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Section {
    None,
    Problem,
    Window,
    Tolerances,
    Potential,
    Leading,
    Chain,
    Extension,
    Assertions,
    Commands,
}

fn parse_expr(line: usize, key: &str, value: &str) -> Result<Expr, ScenarioError> {
    parse(value).map_err(|e| ScenarioError {
        line,
        message: format!("{key}: {}: {e}", e.name()),
    })
}

/// Constant expressions: parsed like any entry, then required to be
/// x-free and folded to a number.
fn parse_const(line: usize, key: &str, value: &str) -> Result<Complex64, ScenarioError> {
    let e = parse_expr(line, key, value)?;
    if e.depends_on_x() {
        return err(line, format!("{key}: expected a constant, got an x-dependent expression"));
    }
    e.evaluate(0.0).map_err(|er| ScenarioError {
        line,
        message: format!("{key}: {}: {er}", er.name()),
    })
}

/// Splits `V[i][j]` style keys; `prefix` is the letter.
fn entry_indices(key: &str, prefix: &str) -> Option<(usize, usize)> {
    let rest = key.strip_prefix(prefix)?;
    let rest = rest.strip_prefix('[')?;
    let (i, rest) = rest.split_once(']')?;
    let rest = rest.strip_prefix('[')?;
    let (j, rest) = rest.split_once(']')?;
    if !rest.is_empty() {
        return None;
    }
    Some((i.trim().parse().ok()?, j.trim().parse().ok()?))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ScenarioError> {
    value
        .parse()
        .map_err(|_| ScenarioError { line, message: format!("{key}: expected an integer, got '{value}'") })
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ScenarioError> {
    value
        .parse()
        .map_err(|_| ScenarioError { line, message: format!("{key}: expected a number, got '{value}'") })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ScenarioError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => err(line, format!("{key}: expected true or false, got '{value}'")),
    }
}

pub fn parse_scenario(text: &str, name: &str) -> Result<Scenario, ScenarioError> {
    let mut section = Section::None;

    let mut n: Option<usize> = None;
    let mut order: Option<usize> = None;
    let mut seed: u64 = 0;
    let mut xmin: Option<f64> = None;
    let mut xmax: Option<f64> = None;
    let mut points: Option<usize> = None;
    let mut tol = Tolerances::default();
    let mut potential: Vec<(usize, usize, usize, Expr)> = Vec::new();
    let mut leading: Vec<(usize, usize, usize, Complex64)> = Vec::new();
    let mut chains: Vec<RawChain> = Vec::new();
    let mut extension: Vec<RawChain> = Vec::new();
    let mut no_lower_order = false;
    let mut commands: Option<(usize, Vec<Command>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(header) = line.strip_prefix('[') {
            let Some(header) = header.strip_suffix(']') else {
                return err(ln, "unterminated section header");
            };
            section = match header.trim() {
                "problem" => Section::Problem,
                "window" => Section::Window,
                "tolerances" => Section::Tolerances,
                "potential" => Section::Potential,
                "leading" => Section::Leading,
                "chain" => {
                    chains.push(RawChain { line: ln, lambda: None, members: Vec::new() });
                    Section::Chain
                }
                "extension" => {
                    extension.push(RawChain { line: ln, lambda: None, members: Vec::new() });
                    Section::Extension
                }
                "assertions" => Section::Assertions,
                "commands" => Section::Commands,
                other => return err(ln, format!("unknown section '[{other}]'")),
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(ln, format!("expected 'key = value', got '{line}'"));
        };
        let key = key.trim();
        let value = value.trim();
        match section {
            Section::None => return err(ln, "entry before any section header"),
            Section::Problem => match key {
                "n" => n = Some(parse_usize(ln, key, value)?),
                "N" => order = Some(parse_usize(ln, key, value)?),
                "seed" => {
                    seed = value.parse().map_err(|_| ScenarioError {
                        line: ln,
                        message: format!("seed: expected an unsigned integer, got '{value}'"),
                    })?
                }
                other => return err(ln, format!("unknown [problem] key '{other}'")),
            },
            Section::Window => match key {
                "xmin" => xmin = Some(parse_f64(ln, key, value)?),
                "xmax" => xmax = Some(parse_f64(ln, key, value)?),
                "points" => points = Some(parse_usize(ln, key, value)?),
                other => return err(ln, format!("unknown [window] key '{other}'")),
            },
            Section::Tolerances => {
                let v = parse_f64(ln, key, value)?;
                if !(v.is_finite() && v > 0.0) {
                    return err(ln, format!("{key}: tolerance must be a positive number"));
                }
                match key {
                    "wronskian-rel" => tol.wronskian_rel = v,
                    "singular-rel" => tol.singular_rel = v,
                    "residual" => tol.residual = v,
                    "chain" => tol.chain = v,
                    "zero-rel" => tol.zero_rel = v,
                    "fd-step" => tol.fd_step = v,
                    "symmetry" => tol.symmetry = v,
                    other => return err(ln, format!("unknown [tolerances] key '{other}'")),
                }
            }
            Section::Potential => {
                let Some((i, j)) = entry_indices(key, "V") else {
                    return err(ln, format!("expected a 'V[i][j]' key, got '{key}'"));
                };
                potential.push((ln, i, j, parse_expr(ln, key, value)?));
            }
            Section::Leading => {
                let Some((i, j)) = entry_indices(key, "X") else {
                    return err(ln, format!("expected an 'X[i][j]' key, got '{key}'"));
                };
                leading.push((ln, i, j, parse_const(ln, key, value)?));
            }
            Section::Chain | Section::Extension => {
                let raw = if section == Section::Chain {
                    chains.last_mut().unwrap()
                } else {
                    extension.last_mut().unwrap()
                };
                match key {
                    "lambda" => raw.lambda = Some(parse_const(ln, key, value)?),
                    "member" => {
                        let comps = value
                            .split('|')
                            .map(|c| parse_expr(ln, key, c.trim()))
                            .collect::<Result<Vec<_>, _>>()?;
                        raw.members.push(VectorFunction::new(comps));
                    }
                    other => return err(ln, format!("unknown chain key '{other}'")),
                }
            }
            Section::Assertions => match key {
                "no-lower-order-intertwiner" => no_lower_order = parse_bool(ln, key, value)?,
                other => return err(ln, format!("unknown [assertions] key '{other}'")),
            },
            Section::Commands => match key {
                "run" => {
                    let mut list = Vec::new();
                    for part in value.split(',') {
                        let part = part.trim();
                        let Some(cmd) = Command::from_name(part) else {
                            return err(ln, format!("unknown command '{part}'"));
                        };
                        list.push(cmd);
                    }
                    commands = Some((ln, list));
                }
                other => return err(ln, format!("unknown [commands] key '{other}'")),
            },
        }
    }

    let Some(n) = n else { return err(0, "[problem] n is required") };
    let Some(order) = order else { return err(0, "[problem] N is required") };
    if n == 0 || order == 0 {
        return err(0, "[problem] n and N must be at least 1");
    }
    let (Some(xmin), Some(xmax), Some(points)) = (xmin, xmax, points) else {
        return err(0, "[window] requires xmin, xmax and points");
    };
    if !(xmin < xmax) || points < 2 {
        return err(0, "[window] requires xmin < xmax and points >= 2");
    }
    let window = Grid::new(xmin, xmax, points);

    let mut v = vec![vec![Expr::zero(); n]; n];
    let mut seen = vec![false; n * n];
    for (ln, i, j, e) in potential {
        if i >= n || j >= n {
            return err(ln, format!("V[{i}][{j}] is outside the {n}x{n} potential"));
        }
        if seen[i * n + j] {
            return err(ln, format!("duplicate entry V[{i}][{j}]"));
        }
        seen[i * n + j] = true;
        v[i][j] = e;
    }

    let mut x_n = CMatrix::identity(n);
    let mut seen = vec![false; n * n];
    for (ln, i, j, z) in leading {
        if i >= n || j >= n {
            return err(ln, format!("X[{i}][{j}] is outside the {n}x{n} leading coefficient"));
        }
        if seen[i * n + j] {
            return err(ln, format!("duplicate entry X[{i}][{j}]"));
        }
        seen[i * n + j] = true;
        x_n.set(i, j, z);
    }

    let finish = |raw: Vec<RawChain>, what: &str| -> Result<Vec<AssociationChain>, ScenarioError> {
        let mut out = Vec::with_capacity(raw.len());
        for r in raw {
            let Some(lambda) = r.lambda else {
                return err(r.line, format!("[{what}] is missing its lambda"));
            };
            if r.members.is_empty() {
                return err(r.line, format!("[{what}] has no members"));
            }
            for m in &r.members {
                if m.dim() != n {
                    return err(
                        r.line,
                        format!("[{what}] member has {} components, expected {n}", m.dim()),
                    );
                }
            }
            out.push(AssociationChain::new(lambda, r.members));
        }
        Ok(out)
    };
    let chains = finish(chains, "chain")?;
    let extension = finish(extension, "extension")?;

    if chains.is_empty() {
        return err(0, "at least one [chain] section is required");
    }
    let total: usize = chains.iter().map(|c| c.len()).sum();
    if total != n * order {
        return err(0, format!("chain sections carry {total} members, n*N = {}", n * order));
    }

    let Some((cmd_line, commands)) = commands else {
        return err(0, "[commands] run = ... is required");
    };
    if commands.is_empty() {
        return err(cmd_line, "command list is empty");
    }
    let mut last = None;
    for c in &commands {
        let idx = c.canonical_index();
        if let Some(prev) = last {
            if idx <= prev {
                return err(
                    cmd_line,
                    format!("'{}' is out of canonical order (each command at most once)", c.name()),
                );
            }
        }
        last = Some(idx);
        for dep in c.dependencies() {
            if !commands.contains(dep) {
                return err(cmd_line, format!("'{}' requires '{}'", c.name(), dep.name()));
            }
        }
    }
    if commands.contains(&Command::Conjugate) && extension.is_empty() {
        return err(cmd_line, "'conjugate' requires at least one [extension] section");
    }

    Ok(Scenario {
        name: name.to_string(),
        n,
        order,
        seed,
        window,
        tol,
        potential: v,
        leading: x_n,
        chains,
        extension,
        no_lower_order,
        commands,
    })
}
