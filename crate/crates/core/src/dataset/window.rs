use super::clip::AnimationClip;

/// `context` known frames, `missing` frames to fill, then one target frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Window {
    pub clip: usize,
    pub start: usize,
    pub context: usize,
    pub missing: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.context + self.missing + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Clip frame of the last context frame; its root anchors the window.
    pub fn anchor_frame(&self) -> usize {
        self.start + self.context - 1
    }

    pub fn target_frame(&self) -> usize {
        self.start + self.context + self.missing
    }

    /// Window rows holding missing frames.
    pub fn missing_rows(&self) -> std::ops::Range<usize> {
        self.context..self.context + self.missing
    }

    /// Same start and context, shorter gap; the window is cut from the end.
    pub fn truncated(&self, missing: usize) -> Window {
        assert!(missing >= 1 && missing <= self.missing, "truncation to {missing}");
        Window { missing, ..*self }
    }
}

/// Windows of `context + missing + 1` frames at stride `offset`.
///
/// A clip shorter than one window yields no windows.
pub fn slice_windows(
    clip_ref: usize,
    clip: &AnimationClip,
    context: usize,
    missing: usize,
    offset: usize,
) -> Vec<Window> {
    assert!(context >= 1 && missing >= 1 && offset >= 1);
    let len = context + missing + 1;
    let n = clip.len();
    if len > n {
        return Vec::new();
    }
    (0..=(n - len) / offset)
        .map(|k| Window {
            clip: clip_ref,
            start: k * offset,
            context,
            missing,
        })
        .collect()
}
