"""Dense matcher backends.

``loftr`` wraps the pretrained transformer matcher (kornia's LoFTR,
"outdoor" weights by default) and is the production backend.  When kornia
or a checkpoint is unavailable, the ``correlation`` backend provides a
dependency-light coarse dense matcher: normalized cross-correlation of
textured grid patches over a local search window, with sub-pixel peak
refinement.  Both emit raw confidences; thresholding belongs downstream.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .manifest import JobError


class CorrelationMatcher:
    """Patch NCC over a local search window, batched with grouped conv."""

    def __init__(
        self,
        device: str = "cpu",
        patch: int = 16,
        stride: int = 16,
        search_radius: int = 64,
        min_texture: float = 0.02,
        chunk: int = 256,
    ):
        if patch % 2 or patch < 4:
            raise ValueError(f"patch must be even and >= 4, got {patch}")
        self.device = torch.device(device)
        self.patch = patch
        self.stride = stride
        self.search_radius = search_radius
        self.min_texture = min_texture
        self.chunk = chunk

    def _keypoints(self, img: torch.Tensor) -> torch.Tensor:
        """Centers of textured grid cells, clear of the image border."""
        h, w = img.shape
        half = self.patch // 2
        ys = torch.arange(half, h - half + 1, self.stride, device=img.device)
        xs = torch.arange(half, w - half + 1, self.stride, device=img.device)
        if len(ys) == 0 or len(xs) == 0:
            return torch.zeros((0, 2), dtype=torch.long, device=img.device)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        pts = torch.stack([gx.ravel(), gy.ravel()], dim=1)
        keep = []
        for x, y in pts.tolist():
            tile = img[y - half : y + half, x - half : x + half]
            keep.append(float(tile.std()) >= self.min_texture)
        return pts[torch.tensor(keep, device=img.device)]

    def match(self, img_a: torch.Tensor, img_b: torch.Tensor):
        """Match grid patches of A against B.

        Returns (pts_a, pts_b, confidence) numpy arrays; confidences are
        the correlation peaks clamped to [0, 1].
        """
        img_a = img_a.to(self.device)
        img_b = img_b.to(self.device)
        pts = self._keypoints(img_a)
        if len(pts) == 0:
            return (np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))
        half = self.patch // 2
        r = self.search_radius
        side = 2 * r + self.patch  # window side; score map side is 2r + 1
        padded = F.pad(img_b[None, None], (r, r, r, r), mode="replicate")[0, 0]

        out_a, out_b, out_c = [], [], []
        for start in range(0, len(pts), self.chunk):
            sub = pts[start : start + self.chunk]
            n = len(sub)
            patches = torch.stack(
                [
                    img_a[y - half : y + half, x - half : x + half]
                    for x, y in sub.tolist()
                ]
            )[:, None]
            # Keypoint (x, y) sits at (x + r, y + r) in the padded image, so
            # the window covering every displacement in [-r, r]^2 has its
            # top-left corner at (x - half, y - half) in padded coordinates.
            windows = torch.stack(
                [
                    padded[y - half : y - half + side, x - half : x - half + side]
                    for x, y in sub.tolist()
                ]
            )[None]  # (1, n, side, side)

            kernels = patches - patches.mean(dim=(2, 3), keepdim=True)
            p_norm = kernels.flatten(1).norm(dim=1).clamp_min(1e-12)
            area = float(self.patch * self.patch)
            ones = torch.ones_like(kernels)

            num = F.conv2d(windows, kernels, groups=n)[0]
            w_sum = F.conv2d(windows, ones, groups=n)[0]
            w_sq = F.conv2d(windows**2, ones, groups=n)[0]
            w_var = (w_sq - w_sum**2 / area).clamp_min(1e-12)
            ncc = num / (p_norm[:, None, None] * w_var.sqrt())

            flat = ncc.flatten(1)
            best = flat.argmax(dim=1)
            score_side = ncc.shape[-1]
            py = (best // score_side).float()
            px = (best % score_side).float()
            peak = flat.gather(1, best[:, None])[:, 0]

            # quadratic sub-pixel refinement where the peak is interior
            for k in range(n):
                iy, ix = int(py[k]), int(px[k])
                if 0 < iy < score_side - 1:
                    c, lo, hi = ncc[k, iy, ix], ncc[k, iy - 1, ix], ncc[k, iy + 1, ix]
                    den = lo + hi - 2 * c
                    if den < -1e-9:
                        py[k] += float((lo - hi) / (2 * den))
                if 0 < ix < score_side - 1:
                    c, lo, hi = ncc[k, iy, ix], ncc[k, iy, ix - 1], ncc[k, iy, ix + 1]
                    den = lo + hi - 2 * c
                    if den < -1e-9:
                        px[k] += float((lo - hi) / (2 * den))

            sub_f = sub.float()
            out_a.append(sub_f.cpu().numpy())
            # score-map cell (px, py) is displacement (px - r, py - r)
            bx = sub_f[:, 0] + px - r
            by = sub_f[:, 1] + py - r
            out_b.append(torch.stack([bx, by], dim=1).cpu().numpy())
            out_c.append(peak.clamp(0.0, 1.0).cpu().numpy())

        return (
            np.concatenate(out_a),
            np.concatenate(out_b),
            np.concatenate(out_c),
        )


class LoFTRMatcher:
    """Pretrained transformer dense matcher (kornia LoFTR)."""

    def __init__(self, weights: str = "outdoor", device: str = "cpu"):
        try:
            from kornia.feature import LoFTR
        except ImportError as exc:
            raise JobError(
                "kornia is not installed; install 'loftr-export[loftr]' or "
                "select the 'correlation' backend"
            ) from exc
        self.device = torch.device(device)
        weights_path = Path(weights)
        looks_like_path = weights_path.suffix in (".ckpt", ".pt", ".pth") or "/" in weights
        if looks_like_path:
            if not weights_path.is_file():
                raise JobError(f"weights file not found: {weights_path}")
            model = LoFTR(pretrained=None)
            state = torch.load(weights_path, map_location="cpu")
            model.load_state_dict(state.get("state_dict", state))
        else:
            try:
                model = LoFTR(pretrained=weights)
            except Exception as exc:
                raise JobError(
                    f"pretrained weights {weights!r} unavailable: {exc}"
                ) from exc
        self.model = model.to(self.device).eval()

    def match(self, img_a: torch.Tensor, img_b: torch.Tensor):
        batch = {
            "image0": img_a[None, None].to(self.device),
            "image1": img_b[None, None].to(self.device),
        }
        with torch.no_grad():
            out = self.model(batch)
        return (
            out["keypoints0"].cpu().numpy(),
            out["keypoints1"].cpu().numpy(),
            out["confidence"].clamp(0.0, 1.0).cpu().numpy(),
        )


def build_matcher(backend: str, weights: str, device: str, search_radius: int):
    if backend == "loftr":
        return LoFTRMatcher(weights=weights, device=device)
    if backend == "correlation":
        return CorrelationMatcher(device=device, search_radius=search_radius)
    raise JobError(f"unknown backend {backend!r}")
