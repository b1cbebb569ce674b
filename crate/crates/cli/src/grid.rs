//! Parsers for list-valued flags.
//!
//! A grid is either a comma list (`0.55,0.6,0.7`) or an inclusive range
//! `start:step:stop` (`0:0.05:0.6`). Integer size lists also accept
//! `start:stop` with step 1.

// Range points are snapped to this many decimals so 0:0.05:0.6 yields 0.15, not 0.15000000000000002.
const SNAP_DECIMALS: i32 = 12;

fn snap(x: f64) -> f64 {
    let k = 10f64.powi(SNAP_DECIMALS);
    (x * k).round() / k
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a number"))?;
    if !v.is_finite() {
        return Err(format!("'{s}' is not finite"));
    }
    Ok(v)
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => {
            let v = single
                .split(',')
                .map(parse_f64)
                .collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err("empty grid".into());
            }
            Ok(v)
        }
        [start, step, stop] => {
            let (a, h, b) = (parse_f64(start)?, parse_f64(step)?, parse_f64(stop)?);
            if h <= 0.0 || b < a {
                return Err(format!("range '{s}' needs step > 0 and stop >= start"));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(format!("range '{s}' has too many points"));
            }
            Ok((0..=n).map(|k| snap(a + k as f64 * h)).collect())
        }
        _ => Err(format!("'{s}' is neither a list nor start:step:stop")),
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("'{s}' is not a nonnegative integer"))
}

pub fn parse_sizes(s: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let (a, h, b) = match parts.as_slice() {
        [single] => return single.split(',').map(parse_usize).collect(),
        [start, stop] => (parse_usize(start)?, 1, parse_usize(stop)?),
        [start, step, stop] => (parse_usize(start)?, parse_usize(step)?, parse_usize(stop)?),
        _ => return Err(format!("'{s}' is neither a list nor a range")),
    };
    if h == 0 || b < a {
        return Err(format!("range '{s}' needs step > 0 and stop >= start"));
    }
    Ok((a..=b).step_by(h).collect())
}

/// Parsed [`parse_grid`] value, usable directly as a flag type.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

impl std::str::FromStr for Grid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_grid(s).map(Grid)
    }
}

/// Parsed [`parse_sizes`] value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sizes(pub Vec<usize>);

impl std::str::FromStr for Sizes {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        parse_sizes(s).map(Sizes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_grid("0.55,0.6").unwrap(), vec![0.55, 0.6]);
        let g = parse_grid("0:0.05:0.6").unwrap();
        assert_eq!(g.len(), 13);
        assert_eq!(g[3], 0.15);
        assert_eq!(g[4], 0.2);
        assert_eq!(*g.last().unwrap(), 0.6);
        assert_eq!(parse_grid("0.05:0.05:0.95").unwrap().len(), 19);
        assert!(parse_grid("1:0:2").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("1:2").is_err());
    }

    #[test]
    fn size_lists() {
        assert_eq!(parse_sizes("2:5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_sizes("2:3:10").unwrap(), vec![2, 5, 8]);
        assert_eq!(parse_sizes("4,9").unwrap(), vec![4, 9]);
        assert!(parse_sizes("5:2").is_err());
        assert!(parse_sizes("-1").is_err());
    }
}
