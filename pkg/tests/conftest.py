"""Shared pytest configuration and fixtures for all tests.

This module provides:
- Parameter set and seeded rng fixtures
- Automatic cleanup of report files written under results/ by the tests
"""
import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.params_ring import get_param_set
from src.sampling import SeededRng

TEST_SEED = "00" * 31 + "2a"


@pytest.fixture
def seed_hex():
    return TEST_SEED


@pytest.fixture
def rng():
    return SeededRng(TEST_SEED)


@pytest.fixture
def full_param():
    return get_param_set("newhope1024")


@pytest.fixture
def toy_param():
    """n=64, q=257, k=1, p=5: NTT-friendly, D4-compatible and quick."""
    return get_param_set("toy-n64-q257")


@pytest.fixture
def scalar_param():
    return get_param_set("toy-n1-q17")


@pytest.fixture
def results_dir():
    path = Path(__file__).parent.parent / "results"
    path.mkdir(exist_ok=True)
    return path


@pytest.fixture(scope="session", autouse=True)
def cleanup_test_artifacts():
    """Clean up test result files after all tests complete."""
    yield

    results_dir = Path(__file__).parent.parent / "results"
    if not results_dir.exists():
        return

    test_patterns = [
        "test_*.json",
        "integration_*.json",
        "test_export_*/*.json",
    ]

    cleaned_count = 0
    for pattern in test_patterns:
        for result_file in results_dir.glob(pattern):
            try:
                result_file.unlink()
                cleaned_count += 1
            except Exception:
                pass
    for folder in results_dir.glob("test_export_*"):
        try:
            folder.rmdir()
        except OSError:
            pass

    if cleaned_count > 0:
        print(f"\n✓ Cleaned up {cleaned_count} test result file(s)")
