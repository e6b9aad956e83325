"""Small constructors shared by tests."""

from __future__ import annotations

import numpy as np

from mvtrack.geometry import CameraModel, Homography
from mvtrack.model import LEFT_ANKLE, NUM_KEYPOINTS, RIGHT_ANKLE, Pose2D, PoseDetection, tight_bbox

# standing figure in pixels, head at the top, ankles at the bottom
TEMPLATE = np.array([
    (0, -80), (-4, -84), (4, -84), (-9, -82), (9, -82), (-20, -62), (20, -62), (-25, -40), (25, -40),
    (-27, -22), (27, -22), (-12, -25), (12, -25), (-11, -10), (11, -10), (-10, 0), (10, 0),
], dtype=float)


def camera(cid="cam", position=(0.0, 0.0), yaw=0.0, hfov=90.0, vfov=60.0, size=(1280, 720), h=None):
    return CameraModel(cid, position, 3.0, yaw, hfov, vfov, h or Homography.identity(), size, 30.0)


def pose_at(u, v, scale=1.0, visible=None):
    xy = TEMPLATE * scale + np.array([u, v])
    return Pose2D.from_arrays(xy, np.full(NUM_KEYPOINTS, 0.9), visible)


def detection(t, u, v, cam="cam", scale=1.0, orientation=None, visible=None):
    pose = pose_at(u, v, scale, visible)
    return PoseDetection(cam, t, pose, tight_bbox(pose), orientation)


def ankles_only(left=None, right=None):
    xy = np.zeros((NUM_KEYPOINTS, 2))
    vis = np.zeros(NUM_KEYPOINTS, dtype=bool)
    if left is not None:
        xy[LEFT_ANKLE], vis[LEFT_ANKLE] = left, True
    if right is not None:
        xy[RIGHT_ANKLE], vis[RIGHT_ANKLE] = right, True
    return Pose2D.from_arrays(xy, visible=vis)
