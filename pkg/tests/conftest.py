from __future__ import annotations

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def figure_labels(height: int, width: int) -> np.ndarray:
    """Blocky person-shaped label map: torso (1), head (23), hands (3, 4),
    feet (5, 6), legs (7, 8)."""
    labels = np.zeros((height, width), dtype=np.uint8)
    cx = width // 2
    hw = max(width // 8, 2)
    head_h = max(height // 8, 2)
    torso_top = height // 5
    torso_bottom = height // 2
    labels[torso_top - head_h : torso_top, cx - hw // 2 : cx + hw // 2] = 23
    labels[torso_top:torso_bottom, cx - hw : cx + hw] = 1
    hand_h = max(height // 16, 1)
    labels[torso_bottom : torso_bottom + hand_h, cx - hw - 2 : cx - hw] = 4
    labels[torso_bottom : torso_bottom + hand_h, cx + hw : cx + hw + 2] = 3
    leg_bottom = height * 4 // 5
    labels[torso_bottom:leg_bottom, cx - hw : cx - hw // 2] = 7
    labels[torso_bottom:leg_bottom, cx + hw // 2 : cx + hw] = 8
    labels[leg_bottom : min(leg_bottom + hand_h, height), cx - hw : cx - hw // 2] = 5
    labels[leg_bottom : min(leg_bottom + hand_h, height), cx + hw // 2 : cx + hw] = 6
    return labels


def random_labels(rng: np.random.Generator, height: int, width: int,
                  pool=(0, 0, 0, 1, 2, 3, 5, 7, 15, 23, 24)) -> np.ndarray:
    """Random label map drawn from a pool biased toward background."""
    return rng.choice(np.asarray(pool, dtype=np.uint8), size=(height, width))


def random_image(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL/SKIP line per acceptance criterion."""
    lines = []
    for status, reports in terminalreporter.stats.items():
        if status not in ("passed", "failed", "skipped"):
            continue
        for report in reports:
            if "test_acceptance" not in getattr(report, "nodeid", ""):
                continue
            if status != "skipped" and report.when != "call":
                continue
            name = report.nodeid.split("::")[-1]
            lines.append(f"[{status.upper():>7}] {name}")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines), key=lambda s: s.split("] ")[1]):
            terminalreporter.write_line(line)
