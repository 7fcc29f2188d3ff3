//! Line-oriented text formats for phase states and trajectories.
//!
//! Every record is one line starting with a tag. Reals are written with 17
//! significant digits, so reading a file back reproduces every `f64` bit for
//! bit. Ball labels in files are one-based.
//!
//! ```text
//! param n_balls 2
//! param dim 3
//! param radius 5.0000000000000000e-1
//! param box 1.0000000000000000e1
//! param masses 1.0000000000000000e0 1.0000000000000000e0
//! ...
//! initial time 0.0000000000000000e0
//! initial q <νN reals>
//! initial v <νN reals>
//! event <k> <time> <i> <j> <margin> image <ν ints> normal <ν> pre <νN> post <νN>
//! flag <event> tangential|double
//! double <i> <j> <tau> image <ν ints> normal <ν>
//! min_gap <real>
//! final time|q|v ...
//! end
//! ```

use std::fmt::Write;
use std::str::FromStr;

use crate::dynamics::{CollisionEvent, Contact, DoubleCollision, SingularFlag, SingularKind, Trajectory};
use crate::error::{Error, Result};
use crate::pair::Pair;
use crate::params::SystemParams;
use crate::scalar::Real;
use crate::state::PhaseState;
use crate::symbolic::SymbolicSequence;

fn reals<T: Real>(out: &mut String, xs: &[T]) {
    for x in xs {
        let _ = write!(out, " {x:.16e}");
    }
}

fn write_params<T: Real>(out: &mut String, p: &SystemParams<T>) {
    let _ = writeln!(out, "param n_balls {}", p.n_balls);
    let _ = writeln!(out, "param dim {}", p.dim);
    let _ = writeln!(out, "param radius {:.16e}", p.radius);
    let _ = writeln!(out, "param box {:.16e}", p.box_len);
    out.push_str("param masses");
    reals(out, &p.masses);
    out.push('\n');
    let _ = writeln!(out, "param rank_tol {:.16e}", p.rank_tol);
    let _ = writeln!(out, "param tangency_tol {:.16e}", p.tangency_tol);
    let _ = writeln!(out, "param simultaneity_tol {:.16e}", p.simultaneity_tol);
    let _ = writeln!(out, "param accumulation_floor {:.16e}", p.accumulation_floor);
    match p.horizon {
        Some(h) => {
            let _ = writeln!(out, "param horizon {h:.16e}");
        }
        None => out.push_str("param horizon none\n"),
    }
}

fn write_state<T: Real>(out: &mut String, tag: &str, s: &PhaseState<T>) {
    let _ = writeln!(out, "{tag} time {:.16e}", s.time);
    let _ = write!(out, "{tag} q");
    reals(out, &s.positions);
    let _ = write!(out, "\n{tag} v");
    reals(out, &s.velocities);
    out.push('\n');
}

fn write_contact<T: Real>(out: &mut String, image: &[i64], normal: &[T]) {
    out.push_str(" image");
    for k in image {
        let _ = write!(out, " {k}");
    }
    out.push_str(" normal");
    reals(out, normal);
}

/// Parameters plus an initial state, as read by `simulate`.
pub fn state_to_text<T: Real>(params: &SystemParams<T>, state: &PhaseState<T>) -> String {
    let mut out = String::from("# hardballs state\n");
    write_params(&mut out, params);
    write_state(&mut out, "initial", state);
    out.push_str("end\n");
    out
}

pub fn trajectory_to_text<T: Real>(params: &SystemParams<T>, traj: &Trajectory<T>) -> String {
    let mut out = String::from("# hardballs trajectory\n");
    write_params(&mut out, params);
    write_state(&mut out, "initial", &traj.initial);
    for (k, e) in traj.events.iter().enumerate() {
        let _ = write!(
            out,
            "event {} {:.16e} {} {} {:.16e}",
            k + 1,
            e.time,
            e.pair.lo() + 1,
            e.pair.hi() + 1,
            e.grazing_margin
        );
        write_contact(&mut out, &e.image, &e.normal);
        out.push_str(" pre");
        reals(&mut out, &e.v_pre);
        out.push_str(" post");
        reals(&mut out, &e.v_post);
        out.push('\n');
    }
    for f in &traj.singular_flags {
        let kind = match f.kind {
            SingularKind::Tangential => "tangential",
            SingularKind::Double => "double",
        };
        let _ = writeln!(out, "flag {} {kind}", f.event + 1);
    }
    if let Some(d) = &traj.pending_double {
        for (pair, c) in &d.contacts {
            let _ = write!(out, "double {} {} {:.16e}", pair.lo() + 1, pair.hi() + 1, c.tau);
            write_contact(&mut out, &c.image, &c.normal);
            out.push('\n');
        }
    }
    let _ = writeln!(out, "min_gap {:.16e}", traj.min_gap);
    write_state(&mut out, "final", &traj.final_state);
    out.push_str("end\n");
    out
}

struct Fields<'a> {
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn word(&mut self) -> Result<&'a str> {
        self.it.next().ok_or_else(|| self.err("line ends early"))
    }

    fn expect(&mut self, tag: &str) -> Result<()> {
        let w = self.word()?;
        if w == tag {
            Ok(())
        } else {
            Err(self.err(format!("expected `{tag}`, found `{w}`")))
        }
    }

    fn parse<X: FromStr>(&mut self) -> Result<X> {
        let w = self.word()?;
        w.parse().map_err(|_| self.err(format!("cannot parse `{w}`")))
    }

    fn many<X: FromStr>(&mut self, n: usize) -> Result<Vec<X>> {
        (0..n).map(|_| self.parse()).collect()
    }

    fn rest<X: FromStr>(&mut self) -> Result<Vec<X>> {
        let mut v = Vec::new();
        while let Some(w) = self.it.next() {
            v.push(w.parse().map_err(|_| self.err(format!("cannot parse `{w}`")))?);
        }
        Ok(v)
    }

    fn done(&mut self) -> Result<()> {
        match self.it.next() {
            None => Ok(()),
            Some(w) => Err(self.err(format!("unexpected trailing `{w}`"))),
        }
    }

    fn pair(&mut self, n_balls: usize) -> Result<Pair> {
        let (i, j): (usize, usize) = (self.parse()?, self.parse()?);
        Pair::from_labels(i, j)
            .filter(|p| p.hi() < n_balls)
            .ok_or_else(|| self.err(format!("invalid pair ({i},{j})")))
    }
}

#[derive(Default)]
struct StateParts<T> {
    time: Option<T>,
    q: Option<Vec<T>>,
    v: Option<Vec<T>>,
}

impl<T: Real> StateParts<T> {
    fn read(&mut self, f: &mut Fields<'_>) -> Result<()> {
        match f.word()? {
            "time" => {
                self.time = Some(f.parse()?);
                f.done()
            }
            "q" => {
                self.q = Some(f.rest()?);
                Ok(())
            }
            "v" => {
                self.v = Some(f.rest()?);
                Ok(())
            }
            w => Err(f.err(format!("unknown state field `{w}`"))),
        }
    }

    fn build(self, dim: usize, what: &str) -> Result<PhaseState<T>> {
        let missing = |field: &str| Error::Parse {
            line: 0,
            message: format!("missing `{what} {field}` record"),
        };
        let mut s = PhaseState::new(
            dim,
            self.q.ok_or_else(|| missing("q"))?,
            self.v.ok_or_else(|| missing("v"))?,
        )?;
        s.time = self.time.ok_or_else(|| missing("time"))?;
        Ok(s)
    }
}

#[derive(Default)]
struct ParamParts<T> {
    n_balls: Option<usize>,
    dim: Option<usize>,
    radius: Option<T>,
    box_len: Option<T>,
    masses: Option<Vec<T>>,
    rank_tol: Option<T>,
    tangency_tol: Option<T>,
    simultaneity_tol: Option<T>,
    accumulation_floor: Option<T>,
    horizon: Option<Option<T>>,
}

impl<T: Real> ParamParts<T> {
    fn read(&mut self, f: &mut Fields<'_>) -> Result<()> {
        match f.word()? {
            "n_balls" => self.n_balls = Some(f.parse()?),
            "dim" => self.dim = Some(f.parse()?),
            "radius" => self.radius = Some(f.parse()?),
            "box" => self.box_len = Some(f.parse()?),
            "masses" => {
                self.masses = Some(f.rest()?);
                return Ok(());
            }
            "rank_tol" => self.rank_tol = Some(f.parse()?),
            "tangency_tol" => self.tangency_tol = Some(f.parse()?),
            "simultaneity_tol" => self.simultaneity_tol = Some(f.parse()?),
            "accumulation_floor" => self.accumulation_floor = Some(f.parse()?),
            "horizon" => {
                let w = f.word()?;
                self.horizon = Some(if w == "none" {
                    None
                } else {
                    Some(w.parse().map_err(|_| f.err(format!("cannot parse `{w}`")))?)
                });
            }
            w => return Err(f.err(format!("unknown parameter `{w}`"))),
        }
        f.done()
    }

    fn build(self) -> Result<SystemParams<T>> {
        let missing = |field: &str| Error::Parse {
            line: 0,
            message: format!("missing `param {field}` record"),
        };
        let masses = self.masses.ok_or_else(|| missing("masses"))?;
        if let Some(n) = self.n_balls {
            if n != masses.len() {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: masses.len(),
                });
            }
        }
        let mut p = SystemParams::new(
            self.dim.ok_or_else(|| missing("dim"))?,
            self.radius.ok_or_else(|| missing("radius"))?,
            self.box_len.ok_or_else(|| missing("box"))?,
            masses,
        )?;
        if let Some(x) = self.rank_tol {
            p.rank_tol = x;
        }
        if let Some(x) = self.tangency_tol {
            p.tangency_tol = x;
        }
        if let Some(x) = self.simultaneity_tol {
            p.simultaneity_tol = x;
        }
        if let Some(x) = self.accumulation_floor {
            p.accumulation_floor = x;
        }
        if let Some(h) = self.horizon {
            p.horizon = h;
        }
        Ok(p)
    }
}

fn lines(text: &str) -> impl Iterator<Item = Fields<'_>> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let line = raw.trim();
        (!line.is_empty() && !line.starts_with('#')).then(|| Fields {
            line: k + 1,
            it: line.split_whitespace(),
        })
    })
}

fn read_contact<T: Real>(f: &mut Fields<'_>, dim: usize) -> Result<(Vec<i64>, Vec<T>)> {
    f.expect("image")?;
    let image = f.many(dim)?;
    f.expect("normal")?;
    let normal = f.many(dim)?;
    Ok((image, normal))
}

/// Reads parameters and the `initial` state from a state or trajectory file.
pub fn state_from_text<T: Real>(text: &str) -> Result<(SystemParams<T>, PhaseState<T>)> {
    let mut params = ParamParts::default();
    let mut initial = StateParts::default();
    for mut f in lines(text) {
        match f.word()? {
            "param" => params.read(&mut f)?,
            "initial" => initial.read(&mut f)?,
            "end" => break,
            _ => {}
        }
    }
    let params = params.build()?;
    let state = initial.build(params.dim, "initial")?;
    state.check_shape(&params)?;
    Ok((params, state))
}

pub fn trajectory_from_text<T: Real>(text: &str) -> Result<(SystemParams<T>, Trajectory<T>)> {
    let mut pp = ParamParts::default();
    let mut params: Option<SystemParams<T>> = None;
    let mut initial = StateParts::default();
    let mut fin = StateParts::default();
    let mut events = Vec::new();
    let mut flags = Vec::new();
    let mut contacts = Vec::new();
    let mut min_gap = None;
    let mut ended = false;
    for mut f in lines(text) {
        let tag = f.word()?;
        if tag == "param" {
            pp.read(&mut f)?;
            continue;
        }
        let p = match &params {
            Some(p) => p,
            None => params.insert(std::mem::take(&mut pp).build()?),
        };
        let (dim, len) = (p.dim, p.phase_len());
        match tag {
            "initial" => initial.read(&mut f)?,
            "final" => fin.read(&mut f)?,
            "event" => {
                let k: usize = f.parse()?;
                if k != events.len() + 1 {
                    return Err(f.err(format!("event {k} out of order")));
                }
                let time = f.parse()?;
                let pair = f.pair(p.n_balls)?;
                let grazing_margin = f.parse()?;
                let (image, normal) = read_contact(&mut f, dim)?;
                f.expect("pre")?;
                let v_pre = f.many(len)?;
                f.expect("post")?;
                let v_post = f.many(len)?;
                f.done()?;
                events.push(CollisionEvent {
                    time,
                    pair,
                    image,
                    normal,
                    v_pre,
                    v_post,
                    grazing_margin,
                });
            }
            "flag" => {
                let event: usize = f.parse()?;
                let kind = match f.word()? {
                    "tangential" => SingularKind::Tangential,
                    "double" => SingularKind::Double,
                    w => return Err(f.err(format!("unknown flag kind `{w}`"))),
                };
                f.done()?;
                flags.push(SingularFlag {
                    event: event.checked_sub(1).ok_or_else(|| f.err("flag index is one-based"))?,
                    kind,
                });
            }
            "double" => {
                let pair = f.pair(p.n_balls)?;
                let tau = f.parse()?;
                let (image, normal) = read_contact(&mut f, dim)?;
                f.done()?;
                contacts.push((pair, Contact { tau, image, normal }));
            }
            "min_gap" => {
                min_gap = Some(f.parse()?);
                f.done()?;
            }
            "end" => {
                ended = true;
                break;
            }
            w => return Err(f.err(format!("unknown record `{w}`"))),
        }
    }
    if !ended {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: "missing `end` record (truncated file?)".into(),
        });
    }
    let params = match params {
        Some(p) => p,
        None => pp.build()?,
    };
    let initial = initial.build(params.dim, "initial")?;
    let final_state = fin.build(params.dim, "final")?;
    let sequence = SymbolicSequence::new(params.n_balls, events.iter().map(|e| e.pair).collect())?;
    let traj = Trajectory {
        initial,
        events,
        sequence,
        singular_flags: flags,
        min_gap: min_gap.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing `min_gap` record".into(),
        })?,
        final_state,
        pending_double: (!contacts.is_empty()).then_some(DoubleCollision { contacts }),
    };
    Ok((params, traj))
}
