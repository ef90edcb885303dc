//! Writer for the standard LP text format, the escape hatch toward external
//! solvers. Coefficients are emitted as decimals; rows whose coefficients
//! have no finite decimal expansion get an exact fallback comment line.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use num::bigint::BigInt;
use num::{One, Signed, Zero};

use crate::lp::problem::{Cmp, LinearProblem, Sense, VarKind};
use crate::ratio::{display, to_f64, Rat};

/// Exact finite decimal expansion, or `None` if the denominator has prime
/// factors other than 2 and 5.
fn exact_decimal(x: &Rat) -> Option<String> {
    let mut den = x.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&den % &two).is_zero() {
        den /= &two;
        twos += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        fives += 1;
    }
    if !den.is_one() {
        return None;
    }
    let digits = twos.max(fives);
    let scale = BigInt::from(10).pow(digits);
    let scaled = x.numer() * &scale / x.denom();
    if digits == 0 {
        return Some(scaled.to_string());
    }
    let neg = scaled.is_negative();
    let abs = scaled.abs().to_string();
    let abs = format!("{:0>width$}", abs, width = digits as usize + 1);
    let split = abs.len() - digits as usize;
    Some(format!(
        "{}{}.{}",
        if neg { "-" } else { "" },
        &abs[..split],
        &abs[split..]
    ))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn render_terms(terms: &[(usize, Rat)], names: &[String], exact: &mut bool) -> String {
    let mut out = String::new();
    for (k, (v, a)) in terms.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        let coeff = match exact_decimal(a) {
            Some(d) => d,
            None => {
                *exact = false;
                format!("{}", to_f64(a))
            }
        };
        if k == 0 {
            out.push_str(&coeff);
        } else if a.is_negative() {
            out.push_str(&format!(" - {}", &coeff[1..]));
        } else {
            out.push_str(&format!(" + {coeff}"));
        }
        out.push(' ');
        out.push_str(&names[*v]);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

fn render_exact(terms: &[(usize, Rat)], names: &[String]) -> String {
    terms
        .iter()
        .filter(|(_, a)| !a.is_zero())
        .map(|(v, a)| format!("{} {}", display(a), names[*v]))
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Serializes the problem; deterministic byte-for-byte for a given problem.
pub fn to_lp_format(p: &LinearProblem) -> String {
    let mut names: Vec<String> = Vec::with_capacity(p.variables.len());
    for (i, v) in p.variables.iter().enumerate() {
        names.push(format!("{}_{}", sanitize(&v.name), i));
    }
    let mut out = format!("\\ Problem: {}\n", p.name);
    out.push_str(match p.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    let mut exact = true;
    let obj = render_terms(&p.objective, &names, &mut exact);
    if !exact {
        out.push_str(&format!("\\ exact obj: {}\n", render_exact(&p.objective, &names)));
    }
    out.push_str(&format!(" obj: {obj}\n"));
    out.push_str("Subject To\n");
    for (i, c) in p.constraints.iter().enumerate() {
        let mut exact = true;
        let lhs = render_terms(&c.terms, &names, &mut exact);
        let op = match c.cmp {
            Cmp::Le => "<=",
            Cmp::Eq => "=",
            Cmp::Ge => ">=",
        };
        let rhs = match exact_decimal(&c.rhs) {
            Some(d) => d,
            None => {
                exact = false;
                format!("{}", to_f64(&c.rhs))
            }
        };
        let cname = format!("{}_{}", sanitize(&c.name), i);
        if !exact {
            out.push_str(&format!(
                "\\ exact {cname}: {} {op} {}\n",
                render_exact(&c.terms, &names),
                display(&c.rhs)
            ));
        }
        out.push_str(&format!(" {cname}: {lhs} {op} {rhs}\n"));
    }
    out.push_str("Bounds\n");
    for (i, v) in p.variables.iter().enumerate() {
        if v.kind == VarKind::Binary {
            continue;
        }
        match &v.upper {
            Some(u) => {
                let ub = exact_decimal(u).unwrap_or_else(|| format!("{}", to_f64(u)));
                out.push_str(&format!(" 0 <= {} <= {ub}\n", names[i]));
            }
            None => out.push_str(&format!(" {} >= 0\n", names[i])),
        }
    }
    let binaries = p.binary_indices();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for b in binaries {
            out.push_str(&format!(" {}\n", names[b]));
        }
    }
    out.push_str("End\n");
    out
}
