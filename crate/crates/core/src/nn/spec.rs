//! Architecture descriptions and their compact text form.
//!
//! Text form, one line, `;`-separated `key=value` fields:
//!
//! ```text
//! name=SingleNet;input=1x64x64;branch=conv16k3p1,relu,maxpool,flatten;trunk=dense128,relu,dense2
//! ```
//!
//! `branch` may repeat (one per input view). Branch outputs are concatenated
//! in declaration order before the trunk. Layer tokens: `conv{F}k{K}p{P}`,
//! `relu`, `sigmoid`, `tanh`, `maxpool`, `flatten`, `dense{N}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv { filters: usize, kernel: usize, padding: usize },
    Act(Activation),
    MaxPool,
    Flatten,
    Dense { units: usize },
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Act(a) => a.name(),
            LayerSpec::MaxPool => "maxpool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }

    fn parse(tok: &str) -> Option<Self> {
        if let Some(a) = Activation::from_name(tok) {
            return Some(LayerSpec::Act(a));
        }
        match tok {
            "maxpool" => return Some(LayerSpec::MaxPool),
            "flatten" => return Some(LayerSpec::Flatten),
            _ => {}
        }
        if let Some(rest) = tok.strip_prefix("dense") {
            return rest.parse().ok().map(|units| LayerSpec::Dense { units });
        }
        let rest = tok.strip_prefix("conv")?;
        let (f, rest) = rest.split_once('k')?;
        let (k, p) = rest.split_once('p')?;
        Some(LayerSpec::Conv {
            filters: f.parse().ok()?,
            kernel: k.parse().ok()?,
            padding: p.parse().ok()?,
        })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv { filters, kernel, padding } => write!(f, "conv{filters}k{kernel}p{padding}"),
            LayerSpec::Dense { units } => write!(f, "dense{units}"),
            other => f.write_str(other.kind_name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub name: String,
    /// `[C, H, W]` of each branch input.
    pub input: [usize; 3],
    pub branches: Vec<Vec<LayerSpec>>,
    pub trunk: Vec<LayerSpec>,
}

/// Shape bookkeeping derived from a validated spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapePlan {
    /// Output shape of each branch layer, per branch.
    pub branch_shapes: Vec<Vec<Vec<usize>>>,
    /// Width of each branch after its final flatten.
    pub branch_widths: Vec<usize>,
    /// Concatenated width entering the trunk.
    pub concat_width: usize,
    /// Output width of each trunk layer.
    pub trunk_widths: Vec<usize>,
}

impl ShapePlan {
    pub fn output_width(&self) -> usize {
        *self.trunk_widths.last().unwrap_or(&self.concat_width)
    }

    /// Width of the vector fed to the final dense layer.
    pub fn penultimate_width(&self) -> usize {
        let n = self.trunk_widths.len();
        if n >= 2 {
            self.trunk_widths[n - 2]
        } else {
            self.concat_width
        }
    }
}

impl ArchitectureSpec {
    pub fn layer_count(&self) -> usize {
        self.branches.iter().map(Vec::len).sum::<usize>() + self.trunk.len()
    }

    /// Validates adjacent-layer compatibility. Errors carry the global layer
    /// index (branch layers first, in order, then the trunk).
    pub fn plan(&self) -> Result<ShapePlan> {
        if self.branches.is_empty() {
            return Err(Error::Construction { index: 0, reason: "no input branch".into() });
        }
        if self.input.contains(&0) {
            return Err(Error::Construction { index: 0, reason: format!("input {:?} has a zero extent", self.input) });
        }
        let mut index = 0;
        let mut branch_shapes = Vec::new();
        let mut branch_widths = Vec::new();
        for branch in &self.branches {
            let mut shape = self.input.to_vec();
            let mut shapes = Vec::new();
            let mut prev = "input".to_string();
            for layer in branch {
                shape = step(layer, &shape).map_err(|why| Error::Construction {
                    index,
                    reason: format!("{layer} cannot follow {prev} with shape {shape:?}: {why}"),
                })?;
                shapes.push(shape.clone());
                prev = format!("layer {index} ({layer})");
                index += 1;
            }
            if shape.len() != 1 {
                return Err(Error::Construction {
                    index: index.saturating_sub(1),
                    reason: format!("branch must end flattened, ends with shape {shape:?}"),
                });
            }
            branch_widths.push(shape[0]);
            branch_shapes.push(shapes);
        }
        let concat_width: usize = branch_widths.iter().sum();
        let mut shape = vec![concat_width];
        let mut trunk_widths = Vec::new();
        let mut prev = "concat".to_string();
        for layer in &self.trunk {
            if matches!(layer, LayerSpec::Conv { .. } | LayerSpec::MaxPool | LayerSpec::Flatten) {
                return Err(Error::Construction {
                    index,
                    reason: format!("{layer} is not allowed after {prev} in the dense trunk"),
                });
            }
            shape = step(layer, &shape).map_err(|why| Error::Construction { index, reason: why })?;
            trunk_widths.push(shape[0]);
            prev = format!("layer {index} ({layer})");
            index += 1;
        }
        match self.trunk.last() {
            Some(LayerSpec::Dense { .. }) => {}
            _ => {
                return Err(Error::Construction {
                    index: index.saturating_sub(1),
                    reason: "trunk must end with a dense classification layer".into(),
                })
            }
        }
        Ok(ShapePlan { branch_shapes, branch_widths, concat_width, trunk_widths })
    }

    pub fn to_text(&self) -> String {
        let join = |ls: &[LayerSpec]| ls.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",");
        let mut s = format!("name={};input={}x{}x{}", self.name, self.input[0], self.input[1], self.input[2]);
        for b in &self.branches {
            s.push_str(";branch=");
            s.push_str(&join(b));
        }
        s.push_str(";trunk=");
        s.push_str(&join(&self.trunk));
        s
    }

    /// Parses the text form. Unknown keys are ignored so containers (e.g.
    /// checkpoints) can append their own fields.
    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |why: String| Error::Parse { offset: 0, reason: why };
        let mut name = None;
        let mut input = None;
        let mut branches = Vec::new();
        let mut trunk = None;
        for field in text.trim().split(';') {
            let (k, v) = field.split_once('=').ok_or_else(|| bad(format!("field `{field}` lacks `=`")))?;
            match k {
                "name" => name = Some(v.to_string()),
                "input" => {
                    let dims: Vec<usize> = v
                        .split('x')
                        .map(|d| d.parse().map_err(|_| bad(format!("bad input extent `{d}`"))))
                        .collect::<Result<_>>()?;
                    let dims: [usize; 3] = dims.try_into().map_err(|_| bad(format!("input `{v}` is not CxHxW")))?;
                    input = Some(dims);
                }
                "branch" => branches.push(parse_layers(v).map_err(bad)?),
                "trunk" => trunk = Some(parse_layers(v).map_err(bad)?),
                _ => {}
            }
        }
        Ok(Self {
            name: name.ok_or_else(|| bad("missing name".into()))?,
            input: input.ok_or_else(|| bad("missing input".into()))?,
            branches,
            trunk: trunk.ok_or_else(|| bad("missing trunk".into()))?,
        })
    }
}

fn parse_layers(v: &str) -> std::result::Result<Vec<LayerSpec>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|t| LayerSpec::parse(t).ok_or_else(|| format!("unknown layer token `{t}`")))
        .collect()
}

fn step(layer: &LayerSpec, shape: &[usize]) -> std::result::Result<Vec<usize>, String> {
    match *layer {
        LayerSpec::Conv { filters, kernel, padding } => {
            let [_, h, w] = *shape else { return Err("conv needs a [C,H,W] input".into()) };
            if filters == 0 || kernel == 0 {
                return Err("conv needs positive filters and kernel".into());
            }
            let (ph, pw) = (h + 2 * padding, w + 2 * padding);
            if kernel > ph || kernel > pw {
                return Err(format!("kernel {kernel} exceeds padded extent {ph}x{pw}"));
            }
            Ok(vec![filters, ph - kernel + 1, pw - kernel + 1])
        }
        LayerSpec::Act(_) => Ok(shape.to_vec()),
        LayerSpec::MaxPool => {
            let [c, h, w] = *shape else { return Err("maxpool needs a [C,H,W] input".into()) };
            if h % 2 != 0 || w % 2 != 0 {
                return Err(format!("maxpool needs even extents, got {h}x{w}"));
            }
            Ok(vec![c, h / 2, w / 2])
        }
        LayerSpec::Flatten => Ok(vec![shape.iter().product()]),
        LayerSpec::Dense { units } => {
            if shape.len() != 1 {
                return Err(format!("dense needs a flat input, got {shape:?}"));
            }
            if units == 0 {
                return Err("dense needs positive width".into());
            }
            Ok(vec![units])
        }
    }
}
