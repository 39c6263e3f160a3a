//! BVH text: HIERARCHY/MOTION parsing and a ZYX writer.

use std::fmt::Write as _;

use crate::motion::{LocalPose, Mat3, Quat, Skeleton, Vec3};

use super::clip::AnimationClip;
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BvhOptions {
    /// Multiplier from file units to centimetres.
    pub unit_scale: f64,
    pub heading_axis: Vec3,
}

impl Default for BvhOptions {
    fn default() -> Self {
        Self {
            unit_scale: 1.0,
            heading_axis: Vec3::Z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Channel {
    Pos(usize),
    Rot(usize),
}

struct JointDef {
    name: String,
    parent: Option<usize>,
    offset: Vec3,
    channels: Vec<Channel>,
}

fn err(line: usize, msg: impl Into<String>) -> DatasetError {
    DatasetError::Bvh {
        line,
        msg: msg.into(),
    }
}

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (t, i + 1)))
            .collect();
        Tokens { items, pos: 0 }
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(1, |t| t.1)
    }

    fn next(&mut self) -> Result<(&'a str, usize), DatasetError> {
        let t = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| err(self.last_line(), "unexpected end of file"))?;
        self.pos += 1;
        Ok(t)
    }

    fn peek(&self) -> Option<(&'a str, usize)> {
        self.items.get(self.pos).copied()
    }

    fn expect(&mut self, word: &str) -> Result<usize, DatasetError> {
        let (t, line) = self.next()?;
        if t != word {
            return Err(err(line, format!("expected '{word}', found '{t}'")));
        }
        Ok(line)
    }

    fn number(&mut self) -> Result<f64, DatasetError> {
        let (t, line) = self.next()?;
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(line, format!("expected a number, found '{t}'")))
    }

    fn vec3(&mut self) -> Result<Vec3, DatasetError> {
        Ok(Vec3::new(self.number()?, self.number()?, self.number()?))
    }
}

fn parse_joint(
    tok: &mut Tokens,
    parent: Option<usize>,
    joints: &mut Vec<JointDef>,
) -> Result<(), DatasetError> {
    let (name, _) = tok.next()?;
    tok.expect("{")?;
    let oline = tok.expect("OFFSET")?;
    let offset = tok.vec3().map_err(|_| err(oline, "OFFSET needs three numbers"))?;
    let cline = tok.expect("CHANNELS")?;
    let (count, _) = tok.next()?;
    let count: usize = count
        .parse()
        .map_err(|_| err(cline, format!("bad channel count '{count}'")))?;
    let mut channels = Vec::with_capacity(count);
    for _ in 0..count {
        let (c, line) = tok.next()?;
        channels.push(match c {
            "Xposition" => Channel::Pos(0),
            "Yposition" => Channel::Pos(1),
            "Zposition" => Channel::Pos(2),
            "Xrotation" => Channel::Rot(0),
            "Yrotation" => Channel::Rot(1),
            "Zrotation" => Channel::Rot(2),
            _ => return Err(err(line, format!("unsupported channel '{c}'"))),
        });
    }
    let mut axes: Vec<usize> = channels
        .iter()
        .filter_map(|c| match c {
            Channel::Rot(a) => Some(*a),
            _ => None,
        })
        .collect();
    axes.sort_unstable();
    if axes != [0, 1, 2] {
        return Err(err(
            cline,
            format!("joint '{name}': unsupported rotation order, need one channel per axis"),
        ));
    }
    let me = joints.len();
    joints.push(JointDef {
        name: name.to_string(),
        parent,
        offset,
        channels,
    });
    loop {
        let (t, line) = tok.next()?;
        match t {
            "JOINT" => parse_joint(tok, Some(me), joints)?,
            "End" => {
                tok.expect("Site")?;
                tok.expect("{")?;
                tok.expect("OFFSET")?;
                tok.vec3()?;
                tok.expect("}")?;
            }
            "}" => return Ok(()),
            _ => return Err(err(line, format!("unexpected '{t}' in joint '{name}'"))),
        }
    }
}

fn axis_rotation(axis: usize, degrees: f64) -> Quat {
    let a = match axis {
        0 => Vec3::X,
        1 => Vec3::Y,
        _ => Vec3::Z,
    };
    Quat::from_axis_angle(a, degrees.to_radians())
}

pub fn parse_bvh(text: &str, opts: &BvhOptions) -> Result<AnimationClip, DatasetError> {
    let mut tok = Tokens::new(text);
    tok.expect("HIERARCHY")?;
    tok.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(&mut tok, None, &mut joints)?;
    if let Some((t, line)) = tok.peek().filter(|(t, _)| *t != "MOTION") {
        return Err(err(line, format!("expected 'MOTION', found '{t}'")));
    }
    tok.expect("MOTION")?;
    let fline = tok.expect("Frames:")?;
    let (n, _) = tok.next()?;
    let n: usize = n
        .parse()
        .map_err(|_| err(fline, format!("bad frame count '{n}'")))?;
    tok.expect("Frame")?;
    let tline = tok.expect("Time:")?;
    let dt = tok.number()?;
    if dt <= 0.0 {
        return Err(err(tline, format!("frame time {dt} must be positive")));
    }

    let per_frame: usize = joints.iter().map(|j| j.channels.len()).sum();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let rest = &tok.items[tok.pos..];
    let mut i = 0;
    while i < rest.len() {
        let line = rest[i].1;
        let mut vals = Vec::new();
        while i < rest.len() && rest[i].1 == line {
            let v = rest[i]
                .0
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("expected a number, found '{}'", rest[i].0)))?;
            vals.push(v);
            i += 1;
        }
        if vals.len() != per_frame {
            return Err(err(
                line,
                format!("{} values, hierarchy declares {per_frame} channels", vals.len()),
            ));
        }
        rows.push((line, vals));
    }
    if rows.len() != n {
        return Err(err(
            tok.last_line(),
            format!("header declares {n} frames, found {}", rows.len()),
        ));
    }

    let scale = opts.unit_scale;
    let skeleton = Skeleton::new(
        joints.iter().map(|j| j.name.clone()).collect(),
        joints.iter().map(|j| j.parent).collect(),
        joints.iter().map(|j| j.offset.scale(scale)).collect(),
    )
    .map_err(|e| err(1, e.to_string()))?
    .with_heading_axis(opts.heading_axis);

    let frames = rows
        .iter()
        .map(|(_, vals)| {
            let mut it = vals.iter().copied();
            let mut pose = LocalPose::identity(joints.len());
            for (ji, j) in joints.iter().enumerate() {
                let mut q = Quat::IDENTITY;
                let mut p = [0.0; 3];
                for c in &j.channels {
                    let v = it.next().expect("row length checked");
                    match c {
                        Channel::Pos(a) => p[*a] = v,
                        Channel::Rot(a) => q = q * axis_rotation(*a, v),
                    }
                }
                pose.local_rot[ji] = q.normalize();
                if ji == 0 {
                    pose.root_world_pos = (j.offset + Vec3::new(p[0], p[1], p[2])).scale(scale);
                }
            }
            pose
        })
        .collect();
    let fps = 1.0 / dt;
    AnimationClip::new("bvh", skeleton, frames, fps).map_err(|e| err(fline, e.to_string()))
}

/// ZYX Euler angles in degrees with `R = Rz·Ry·Rx`.
fn zyx_degrees(q: Quat) -> [f64; 3] {
    let m: Mat3 = q.to_matrix();
    let sy = (-m.0[2][0]).clamp(-1.0, 1.0);
    let y = sy.atan2(m.0[0][0].hypot(m.0[1][0]));
    let (z, x) = if sy.abs() < 1.0 - 1e-12 {
        (m.0[1][0].atan2(m.0[0][0]), m.0[2][1].atan2(m.0[2][2]))
    } else {
        // Only x − z is determined; put it all in x.
        (0.0, (sy * m.0[0][1]).atan2(m.0[1][1]))
    };
    [z.to_degrees(), y.to_degrees(), x.to_degrees()]
}

/// Serialise with six root channels and three rotation channels per other joint.
pub fn write_bvh(clip: &AnimationClip) -> String {
    let s = &clip.skeleton;
    let mut out = String::from("HIERARCHY\n");
    fn joint(out: &mut String, s: &Skeleton, i: usize, depth: usize) {
        let pad = "  ".repeat(depth);
        let kw = if i == 0 { "ROOT" } else { "JOINT" };
        let o = s.rest_offsets()[i];
        let _ = writeln!(out, "{pad}{kw} {}\n{pad}{{", s.joint_names()[i]);
        let _ = writeln!(out, "{pad}  OFFSET {:.9} {:.9} {:.9}", o.x, o.y, o.z);
        if i == 0 {
            let _ = writeln!(
                out,
                "{pad}  CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation"
            );
        } else {
            let _ = writeln!(out, "{pad}  CHANNELS 3 Zrotation Yrotation Xrotation");
        }
        let children: Vec<usize> = s.children(i).collect();
        for c in &children {
            joint(out, s, *c, depth + 1);
        }
        if children.is_empty() {
            let _ = writeln!(out, "{pad}  End Site\n{pad}  {{\n{pad}    OFFSET 0 0 0\n{pad}  }}");
        }
        let _ = writeln!(out, "{pad}}}");
    }
    joint(&mut out, s, 0, 0);
    let _ = writeln!(out, "MOTION\nFrames: {}\nFrame Time: {:.9}", clip.len(), 1.0 / clip.fps);
    let order = dfs_order(s);
    for f in &clip.frames {
        let p = f.root_world_pos - s.rest_offsets()[0];
        let mut vals = vec![p.x, p.y, p.z];
        for &i in &order {
            vals.extend(zyx_degrees(f.local_rot[i]));
        }
        let line: Vec<String> = vals.iter().map(|v| format!("{v:.9}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Joint order in which the hierarchy is written.
fn dfs_order(s: &Skeleton) -> Vec<usize> {
    let mut order = Vec::with_capacity(s.joint_count());
    let mut stack = vec![0];
    while let Some(i) = stack.pop() {
        order.push(i);
        let mut ch: Vec<usize> = s.children(i).collect();
        ch.reverse();
        stack.extend(ch);
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synth_clip, SynthStyle};
    use crate::motion::forward_kinematics;

    const TWO_JOINTS: &str = "HIERARCHY
ROOT hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT knee
  {
    OFFSET 0 -40 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 -40 0
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.0333333
0 0 0 0 0 0 0 0 0
1 2 3 0 0 0 0 0 0
";

    #[test]
    fn zero_rotations_give_rest_offsets() {
        let c = parse_bvh(TWO_JOINTS, &BvhOptions::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert!((c.fps - 30.0).abs() < 1e-3);
        let w = forward_kinematics(&c.skeleton, &c.frames[0]).unwrap();
        assert!(w.positions[1].max_abs_diff(Vec3::new(0.0, -40.0, 0.0)) < 1e-12);
        assert_eq!(c.frames[1].root_world_pos, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn unit_scale_applies_to_offsets_and_translation() {
        let opts = BvhOptions { unit_scale: 100.0, ..Default::default() };
        let c = parse_bvh(TWO_JOINTS, &opts).unwrap();
        assert_eq!(c.skeleton.rest_offsets()[1], Vec3::new(0.0, -4000.0, 0.0));
        assert_eq!(c.frames[1].root_world_pos, Vec3::new(100.0, 200.0, 300.0));
    }

    #[test]
    fn channel_order_is_respected() {
        let text = TWO_JOINTS.replace("1 2 3 0 0 0 0 0 0", "0 0 0 90 90 0 0 0 0");
        let c = parse_bvh(&text, &BvhOptions::default()).unwrap();
        let want = axis_rotation(2, 90.0) * axis_rotation(0, 90.0);
        assert!(c.frames[1].local_rot[0].max_abs_diff_up_to_sign(want) < 1e-12);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let short = TWO_JOINTS.replace("1 2 3 0 0 0 0 0 0", "1 2 3 0 0 0 0 0");
        match parse_bvh(&short, &BvhOptions::default()) {
            Err(DatasetError::Bvh { line: 20, msg }) => assert!(msg.contains("8 values")),
            other => panic!("{other:?}"),
        }
        let bad = TWO_JOINTS.replace("CHANNELS 3 Zrotation Xrotation Yrotation", "CHANNELS 2 Zrotation Xrotation");
        assert!(matches!(parse_bvh(&bad, &BvhOptions::default()), Err(DatasetError::Bvh { line: 9, .. })));
        let frames = TWO_JOINTS.replace("Frames: 2", "Frames: 3");
        assert!(matches!(parse_bvh(&frames, &BvhOptions::default()), Err(DatasetError::Bvh { .. })));
        assert!(matches!(parse_bvh("HIERARCHY\nROOT", &BvhOptions::default()), Err(DatasetError::Bvh { line: 2, .. })));
    }

    #[test]
    fn writer_round_trip() {
        let c = synth_clip(4, 8, 40, SynthStyle::Turn).unwrap();
        let text = write_bvh(&c);
        let back = parse_bvh(&text, &BvhOptions::default()).unwrap();
        assert_eq!(back.len(), 40);
        assert_eq!(back.skeleton.parents(), c.skeleton.parents());
        for (a, b) in c.frames.iter().zip(&back.frames) {
            assert!(a.max_abs_diff(b) < 1e-5);
        }
        let channels: usize = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix("CHANNELS "))
            .map(|l| l.split_whitespace().next().unwrap().parse::<usize>().unwrap())
            .sum();
        assert_eq!(channels, 3 + 3 * 8);
    }

    #[test]
    fn gimbal_lock_angles_still_reconstruct() {
        let q = Quat::from_axis_angle(Vec3::Y, std::f64::consts::FRAC_PI_2) * Quat::from_axis_angle(Vec3::X, 0.3);
        let [z, y, x] = zyx_degrees(q);
        let r = axis_rotation(2, z) * axis_rotation(1, y) * axis_rotation(0, x);
        assert!(r.max_abs_diff_up_to_sign(q) < 1e-9);
    }
}
