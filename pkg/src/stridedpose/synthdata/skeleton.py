from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOPOLOGY_VERSION = 1


@dataclass(frozen=True)
class SkeletonSpec:
    """Kinematic tree with rest-pose bone offsets (mm) from each joint's parent."""

    names: tuple[str, ...]
    parents: tuple[int, ...]
    offsets: np.ndarray  # (J, 3)
    pairs: tuple[tuple[int, int], ...]  # (left, right)

    def __post_init__(self):
        J = len(self.parents)
        if self.parents[0] != 0:
            raise ValueError("joint 0 must be the root (its own parent)")
        for j in range(1, J):
            if not 0 <= self.parents[j] < j:
                raise ValueError(f"joint {j} has parent {self.parents[j]}; parents must precede children")
        if self.offsets.shape != (J, 3):
            raise ValueError("offsets must be (J, 3)")
        seen = [i for pair in self.pairs for i in pair]
        if len(seen) != len(set(seen)):
            raise ValueError("a joint appears in more than one left/right pair")

    @property
    def num_joints(self) -> int:
        return len(self.parents)

    @property
    def bone_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.offsets, axis=1)

    def children(self, j: int) -> list[int]:
        return [c for c in range(1, self.num_joints) if self.parents[c] == j]

    def ancestors(self, j: int) -> list[int]:
        out = []
        while j != 0:
            j = self.parents[j]
            out.append(j)
        return out

    def flip_permutation(self) -> np.ndarray:
        perm = np.arange(self.num_joints)
        for left, right in self.pairs:
            perm[left], perm[right] = right, left
        return perm


def h36m_skeleton() -> SkeletonSpec:
    """17-joint layout in the usual Human3.6M order; y is up, +x is the subject's left."""
    names = (
        "hip", "r_hip", "r_knee", "r_foot", "l_hip", "l_knee", "l_foot",
        "spine", "thorax", "neck", "head",
        "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist",
    )
    parents = (0, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15)
    offsets = np.array(
        [
            [0, 0, 0],
            [-130, 0, 0], [0, -450, 0], [0, -440, 0],
            [130, 0, 0], [0, -450, 0], [0, -440, 0],
            [0, 230, 0], [0, 250, 0], [0, 110, 0], [0, 120, 0],
            [150, -20, 0], [0, -280, 0], [0, -250, 0],
            [-150, -20, 0], [0, -280, 0], [0, -250, 0],
        ],
        dtype=np.float64,
    )
    pairs = ((4, 1), (5, 2), (6, 3), (11, 14), (12, 15), (13, 16))
    return SkeletonSpec(names, parents, offsets, pairs)
