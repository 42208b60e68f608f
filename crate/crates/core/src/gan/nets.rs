use crate::autodiff::{init_uniform, Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// Encoder widths shared by the generator and the discriminator.
pub const WIDTHS: [usize; 3] = [16, 32, 64];
const KERNEL: usize = 4;
const SLOPE: f64 = 0.2;
/// Samples per inference chunk; bounds tape memory.
const CHUNK: usize = 16;

/// Translation direction of one conditional GAN.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "fo")]
    FrameToFlow,
    #[serde(rename = "of")]
    FlowToFrame,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::FrameToFlow, Direction::FlowToFrame];

    pub fn cond_channels(self) -> usize {
        match self {
            Direction::FrameToFlow => 1,
            Direction::FlowToFrame => 2,
        }
    }

    pub fn target_channels(self) -> usize {
        match self {
            Direction::FrameToFlow => 2,
            Direction::FlowToFrame => 1,
        }
    }

    /// Short tag used in parameter names and logs.
    pub fn tag(self) -> &'static str {
        match self {
            Direction::FrameToFlow => "fo",
            Direction::FlowToFrame => "of",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::BOTH.into_iter().find(|d| d.tag() == tag)
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

/// Adds weight and zero bias. Transposed layers store C_in×C_out×k×k.
fn add_layer(
    store: &mut ParamStore<f32>,
    name: &str,
    shape: [usize; 4],
    transposed: bool,
    rng: &mut SplitMix64,
) -> Result<Layer> {
    let (c_in, c_out) = if transposed { (shape[0], shape[1]) } else { (shape[1], shape[0]) };
    let w = store.add(format!("{name}.weight"), init_uniform(&shape, c_in, shape[3], rng))?;
    let b = store.add(format!("{name}.bias"), Tensor::zeros(&[c_out]))?;
    Ok(Layer { w, b })
}

fn find_layer(store: &ParamStore<f32>, name: &str) -> Result<Layer> {
    let get = |suffix: &str| {
        store
            .find(&format!("{name}.{suffix}"))
            .ok_or_else(|| Error::Config(format!("parameter `{name}.{suffix}` missing from store")))
    };
    Ok(Layer { w: get("weight")?, b: get("bias")? })
}

/// Puts a parameter on the tape, either trainable or frozen.
fn place(store: &ParamStore<f32>, g: &mut Graph<f32>, id: ParamId, track: bool) -> Var {
    if track {
        store.leaf(g, id)
    } else {
        g.input(store.get(id).tensor.clone())
    }
}

fn check_input(op: &'static str, t: &Tensor<f32>, channels: usize) -> Result<()> {
    let (_, c, h, w) = t.dims4(op)?;
    if c != channels {
        return Err(Error::shape(op, format!("expected {channels} input channels, got {c}")));
    }
    if h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0 {
        return Err(Error::shape(op, format!("H×W={h}×{w} must be positive multiples of 8")));
    }
    Ok(())
}

/// Runs `f` over consecutive chunks of the leading axis and restacks.
fn chunked(n: usize, mut f: impl FnMut(&[usize]) -> Result<Tensor<f32>>) -> Result<Tensor<f32>> {
    let idx: Vec<usize> = (0..n).collect();
    let parts = idx.chunks(CHUNK).map(&mut f).collect::<Result<Vec<_>>>()?;
    Tensor::stack(&parts.iter().collect::<Vec<_>>())
}

/// U-Net-lite generator: three stride-2 encoder stages, three transposed
/// decoder stages with skips, tanh head.
#[derive(Clone, Debug)]
pub struct GeneratorNet {
    pub direction: Direction,
    pub params: ParamStore<f32>,
    enc: [Layer; 3],
    dec: [Layer; 3],
}

impl GeneratorNet {
    pub fn new(direction: Direction, rng: &mut SplitMix64) -> Result<Self> {
        let mut params = ParamStore::new();
        let [a, b, c] = WIDTHS;
        let cin = direction.cond_channels();
        let cout = direction.target_channels();
        let p = format!("gen.{}", direction.tag());
        let enc = [
            add_layer(&mut params, &format!("{p}.enc0"), [a, cin, KERNEL, KERNEL], false, rng)?,
            add_layer(&mut params, &format!("{p}.enc1"), [b, a, KERNEL, KERNEL], false, rng)?,
            add_layer(&mut params, &format!("{p}.enc2"), [c, b, KERNEL, KERNEL], false, rng)?,
        ];
        let dec = [
            add_layer(&mut params, &format!("{p}.dec0"), [c, b, KERNEL, KERNEL], true, rng)?,
            add_layer(&mut params, &format!("{p}.dec1"), [2 * b, a, KERNEL, KERNEL], true, rng)?,
            add_layer(&mut params, &format!("{p}.dec2"), [2 * a, cout, KERNEL, KERNEL], true, rng)?,
        ];
        Ok(Self { direction, params, enc, dec })
    }

    /// Rebinds layer handles over a loaded parameter store.
    pub fn from_params(direction: Direction, params: ParamStore<f32>) -> Result<Self> {
        let p = format!("gen.{}", direction.tag());
        let enc = [0, 1, 2].map(|i| find_layer(&params, &format!("{p}.enc{i}")));
        let dec = [0, 1, 2].map(|i| find_layer(&params, &format!("{p}.dec{i}")));
        let [e0, e1, e2] = enc;
        let [d0, d1, d2] = dec;
        Ok(Self { direction, enc: [e0?, e1?, e2?], dec: [d0?, d1?, d2?], params })
    }

    pub fn forward(&self, g: &mut Graph<f32>, x: Var, track: bool) -> Result<Var> {
        let conv = |g: &mut Graph<f32>, l: Layer, v: Var| {
            let (w, b) = (place(&self.params, g, l.w, track), place(&self.params, g, l.b, track));
            g.conv2d(v, w, b, 2, 1)
        };
        let deconv = |g: &mut Graph<f32>, l: Layer, v: Var| {
            let (w, b) = (place(&self.params, g, l.w, track), place(&self.params, g, l.b, track));
            g.deconv2d(v, w, b, 2, 1)
        };
        let e1 = conv(g, self.enc[0], x)?;
        let e1 = g.leaky_relu(e1, SLOPE);
        let e2 = conv(g, self.enc[1], e1)?;
        let e2 = g.instance_norm(e2)?;
        let e2 = g.leaky_relu(e2, SLOPE);
        let e3 = conv(g, self.enc[2], e2)?;
        let e3 = g.instance_norm(e3)?;
        let e3 = g.leaky_relu(e3, SLOPE);

        let d1 = deconv(g, self.dec[0], e3)?;
        let d1 = g.instance_norm(d1)?;
        let d1 = g.relu(d1);
        let d1 = g.concat_channels(d1, e2)?;
        let d2 = deconv(g, self.dec[1], d1)?;
        let d2 = g.instance_norm(d2)?;
        let d2 = g.relu(d2);
        let d2 = g.concat_channels(d2, e1)?;
        let out = deconv(g, self.dec[2], d2)?;
        Ok(g.tanh(out))
    }

    /// Inference over an N×C×H×W batch.
    pub fn predict(&self, cond: &Tensor<f32>) -> Result<Tensor<f32>> {
        check_input("generator", cond, self.direction.cond_channels())?;
        chunked(cond.shape()[0], |idx| {
            let mut g = Graph::new();
            let x = g.input(cond.gather(idx)?);
            let y = self.forward(&mut g, x, false)?;
            Ok(g.value(y).clone())
        })
    }
}

/// PatchGAN-lite discriminator over channel-concatenated (condition, target).
/// Emits one logit per patch; the map is H/8 × W/8.
#[derive(Clone, Debug)]
pub struct DiscriminatorNet {
    pub direction: Direction,
    pub params: ParamStore<f32>,
    convs: [Layer; 3],
    head: Layer,
}

impl DiscriminatorNet {
    pub fn new(direction: Direction, rng: &mut SplitMix64) -> Result<Self> {
        let mut params = ParamStore::new();
        let [a, b, c] = WIDTHS;
        let cin = direction.cond_channels() + direction.target_channels();
        let p = format!("disc.{}", direction.tag());
        let convs = [
            add_layer(&mut params, &format!("{p}.conv0"), [a, cin, KERNEL, KERNEL], false, rng)?,
            add_layer(&mut params, &format!("{p}.conv1"), [b, a, KERNEL, KERNEL], false, rng)?,
            add_layer(&mut params, &format!("{p}.conv2"), [c, b, KERNEL, KERNEL], false, rng)?,
        ];
        let head = add_layer(&mut params, &format!("{p}.head"), [1, c, 1, 1], false, rng)?;
        Ok(Self { direction, params, convs, head })
    }

    pub fn from_params(direction: Direction, params: ParamStore<f32>) -> Result<Self> {
        let p = format!("disc.{}", direction.tag());
        let [c0, c1, c2] = [0, 1, 2].map(|i| find_layer(&params, &format!("{p}.conv{i}")));
        let head = find_layer(&params, &format!("{p}.head"))?;
        Ok(Self { direction, convs: [c0?, c1?, c2?], head, params })
    }

    /// Logit map for an already concatenated pair.
    pub fn forward(&self, g: &mut Graph<f32>, pair: Var, track: bool) -> Result<Var> {
        let mut h = pair;
        for l in self.convs {
            let (w, b) = (place(&self.params, g, l.w, track), place(&self.params, g, l.b, track));
            h = g.conv2d(h, w, b, 2, 1)?;
            h = g.leaky_relu(h, SLOPE);
        }
        let (w, b) = (place(&self.params, g, self.head.w, track), place(&self.params, g, self.head.b, track));
        g.conv2d(h, w, b, 1, 0)
    }

    /// Inference: logits for a batch of (cond, target) pairs.
    pub fn logits(&self, cond: &Tensor<f32>, target: &Tensor<f32>) -> Result<Tensor<f32>> {
        check_input("discriminator condition", cond, self.direction.cond_channels())?;
        check_input("discriminator target", target, self.direction.target_channels())?;
        let (n, _, h, w) = cond.dims4("discriminator")?;
        let (nt, _, ht, wt) = target.dims4("discriminator")?;
        if (n, h, w) != (nt, ht, wt) {
            return Err(Error::shape(
                "discriminator",
                format!("condition is {n}×{h}×{w} but target is {nt}×{ht}×{wt}"),
            ));
        }
        chunked(n, |idx| {
            let mut g = Graph::new();
            let c = g.input(cond.gather(idx)?);
            let t = g.input(target.gather(idx)?);
            let pair = g.concat_channels(c, t)?;
            let y = self.forward(&mut g, pair, false)?;
            Ok(g.value(y).clone())
        })
    }
}
