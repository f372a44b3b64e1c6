use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn lerp(self, other: Point, alpha: f64) -> Point {
        Point::new(
            (1.0 - alpha) * self.x + alpha * other.x,
            (1.0 - alpha) * self.y + alpha * other.y,
        )
    }
}

pub const EYE_LEFT: &str = "eye_left";
pub const EYE_RIGHT: &str = "eye_right";
pub const BROW_PREFIX: &str = "brow_";
pub const MOUTH_PREFIX: &str = "mouth_";

/// Named 2-D points in image coordinates (origin top-left). Iteration order
/// is lexicographic by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkSet {
    points: BTreeMap<String, Point>,
}

impl LandmarkSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, p: Point) -> Result<()> {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(Error::InvalidArgument(
                "landmark coordinates must be finite".into(),
            ));
        }
        self.points.insert(name.into(), p);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<Point> {
        self.points.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<Point> {
        self.get(name)
            .ok_or_else(|| Error::MissingLandmark(name.into()))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Point)> {
        self.points.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.points.keys().map(String::as_str)
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        self.points.values().copied()
    }

    pub fn same_names(&self, other: &LandmarkSet) -> bool {
        self.points.len() == other.points.len() && self.points.keys().eq(other.points.keys())
    }

    pub fn with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = Point> + 'a {
        self.points
            .iter()
            .filter(move |(k, _)| k.starts_with(prefix))
            .map(|(_, v)| *v)
    }

    /// Applies `f` to every point.
    pub fn map(&self, f: impl Fn(Point) -> Point) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|(k, v)| (k.clone(), f(*v)))
                .collect(),
        }
    }

    pub fn within(&self, width: usize, height: usize) -> bool {
        let (mx, my) = ((width - 1) as f64, (height - 1) as f64);
        self.points()
            .all(|p| p.x >= 0.0 && p.y >= 0.0 && p.x <= mx && p.y <= my)
    }

    /// Checks the names required for alignment and cropping.
    pub fn validate_for_normalization(&self) -> Result<()> {
        self.require(EYE_LEFT)?;
        self.require(EYE_RIGHT)?;
        if self.with_prefix(BROW_PREFIX).next().is_none() {
            return Err(Error::MissingLandmark(format!("{BROW_PREFIX}*")));
        }
        if self.with_prefix(MOUTH_PREFIX).next().is_none() {
            return Err(Error::MissingLandmark(format!("{MOUTH_PREFIX}*")));
        }
        Ok(())
    }

    /// Parses `name x y` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut set = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| Error::LandmarkParse {
                line: i + 1,
                reason: reason.into(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err("expected `name x y`"));
            }
            let x: f64 = fields[1].parse().map_err(|_| err("bad x coordinate"))?;
            let y: f64 = fields[2].parse().map_err(|_| err("bad y coordinate"))?;
            if !(x.is_finite() && y.is_finite()) {
                return Err(err("non-finite coordinate"));
            }
            if set
                .points
                .insert(fields[0].to_string(), Point::new(x, y))
                .is_some()
            {
                return Err(err("duplicate name"));
            }
        }
        Ok(set)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, p) in self.iter() {
            let _ = writeln!(s, "{name} {} {}", p.x, p.y);
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

impl FromIterator<(String, Point)> for LandmarkSet {
    fn from_iter<I: IntoIterator<Item = (String, Point)>>(iter: I) -> Self {
        Self {
            points: iter.into_iter().collect(),
        }
    }
}
