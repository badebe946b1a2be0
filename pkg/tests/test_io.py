import json

import pytest
import torch

from conftest import random_field
from gaugeflow.engine.trace import Trace
from gaugeflow.errors import ConformabilityError
from gaugeflow.geometry.fields import Grid, VectorField
from gaugeflow.geometry.lieflow import GeneratorBasis, GeneratorKind, generator_field
from gaugeflow.utils.hashing import compute_hash, config_hash, stream_key
from gaugeflow.utils.io import (read_field_csv, read_jsonl, read_multi_field, read_scalar_field, read_vector_field,
                                sidecar, write_field, write_field_csv, write_jsonl, write_trace)


class TestFieldFiles:

    def test_scalar_file(self, tmp_path, grid):
        f = random_field(grid, 0)
        path = tmp_path / "s.bin"
        write_field(path, f)
        assert path.stat().st_size == 8 * grid.size
        assert json.loads(sidecar(path).read_text()) == {"nx": 16, "ny": 16, "channels": 1}
        assert torch.equal(read_scalar_field(path).values, f.values)

    def test_vector_and_multi_files(self, tmp_path):
        grid = Grid(8, 4)
        u = VectorField(grid, random_field(grid, 1).values, random_field(grid, 2).values)
        write_field(tmp_path / "u.bin", u)
        back = read_vector_field(tmp_path / "u.bin")
        assert back.grid == grid and torch.equal(back.ux, u.ux) and torch.equal(back.uy, u.uy)
        phi = random_field(grid, 3, channels=3)
        write_field(tmp_path / "phi.bin", phi)
        assert torch.equal(read_multi_field(tmp_path / "phi.bin").values, phi.values)

    def test_channel_mismatch(self, tmp_path, grid):
        write_field(tmp_path / "phi.bin", random_field(grid, 4, channels=3))
        with pytest.raises(ConformabilityError):
            read_scalar_field(tmp_path / "phi.bin")
        with pytest.raises(ConformabilityError):
            read_vector_field(tmp_path / "phi.bin")

    def test_truncated_file(self, tmp_path, grid):
        path = tmp_path / "s.bin"
        write_field(path, random_field(grid, 5))
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ConformabilityError):
            read_scalar_field(path)

    def test_csv_has_one_row_per_cell(self, tmp_path):
        grid = Grid(4, 6)
        phi = random_field(grid, 6, channels=2)
        path = tmp_path / "phi.csv"
        write_field_csv(path, phi)
        lines = path.read_text().splitlines()
        assert lines[0] == "i,j,x,y,c0,c1"
        assert len(lines) == 1 + grid.size
        torch.testing.assert_close(read_field_csv(path, grid).values, phi.values, atol=0, rtol=0)


def test_custom_generator_from_file(tmp_path, grid):
    u = VectorField.constant(grid, 1.0, 0.0)
    path = tmp_path / "u.bin"
    write_field(path, u)
    basis = GeneratorBasis.from_tags([f"Custom:{path}", "TranslateY"], grid)
    assert len(basis) == 2 and basis[0].kind == GeneratorKind.Custom
    assert torch.equal(generator_field(basis[0], grid).ux, u.ux)
    with pytest.raises(ConformabilityError):
        GeneratorBasis.from_tags([f"Custom:{path}"], Grid(8, 8))


def test_jsonl(tmp_path):
    records = [{"seed": 0, "b": [1, 2]}, {"seed": 1, "a": None}]
    path = tmp_path / "r.jsonl"
    write_jsonl(path, records)
    assert path.read_text().splitlines()[0] == '{"b":[1,2],"seed":0}'
    assert read_jsonl(path) == records


def test_hashing():
    assert config_hash({"a": 1, "b": {"c": 2, "d": 3}}) == config_hash({"b": {"d": 3, "c": 2}, "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16
    assert compute_hash(b"x") != compute_hash(b"x", prefix=7)
    keys = {stream_key(0, "mc_cap", i) for i in range(100)}
    assert len(keys) == 100
    assert stream_key(0, "mc_cap", 0) != stream_key(0, "signal", 0)


def test_write_trace(tmp_path):
    trace = Trace(1.0, 2.0)
    trace.append(0.5, 1.0, 0.05)
    path = tmp_path / "trace.csv"
    write_trace(path, trace)
    assert path.read_text() == "iter,energy,grad_norm,step\n0,1.0,2.0,0.0\n1,0.5,1.0,0.05\n"
