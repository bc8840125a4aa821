"""
meshcast MCP server implementation.
"""

import asyncio
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from mcp.server.fastmcp import FastMCP
from pydantic import ValidationError

from .data.preprocess import preprocess
from .data.synth import synth_generate
from .data.volume import load_dataset, write_case
from .model.checkpoint import load_checkpoint
from .model.flops import flops_estimate
from .model.mnet import MNetConfig
from .training.evaluate import evaluate
from .training.segment import segment
from .utils.errors import MeshCastError

logger = logging.getLogger(__name__)

# Initialize the MCP server
app = FastMCP("meshcast")


async def run_tool(func: Callable[..., Dict[str, Any]], *args, **kwargs) -> Dict[str, Any]:
    """Run CPU-bound work off the event loop and report failures as dictionaries."""
    try:
        return await asyncio.to_thread(func, *args, **kwargs)
    except MeshCastError as e:
        logger.warning("Tool %s failed: %s", func.__name__, e)
        return e.to_dict()
    except ValidationError as e:
        return {"error": "config error", "message": str(e)}
    except Exception as e:
        logger.exception("Unexpected failure in %s", func.__name__)
        return {"error": "Unexpected error", "message": str(e)}


def _flops(config: Dict[str, Any], input_shape: Optional[List[int]]) -> Dict[str, Any]:
    cfg = MNetConfig.model_validate(config)
    report = flops_estimate(cfg, tuple(input_shape) if input_shape else None)
    return {"total": report.total, "by_kind": report.by_kind, "by_module": report.by_module}


def _synth(n_cases: int, shape: Tuple[int, int, int], seed: int, out_dir: str) -> Dict[str, Any]:
    records = synth_generate(n_cases, shape, seed)
    paths = [str(write_case(r, out_dir)) for r in records]
    return {"count": len(paths), "cases": paths}


def _evaluate(checkpoint: str, data_dir: str, missing: List[str], threshold: float) -> Dict[str, Any]:
    model = load_checkpoint(checkpoint)
    size = tuple(model.config.image_size)
    records = [preprocess(r, size) for r in load_dataset(data_dir)]
    report = evaluate(model, records, threshold=threshold, missing_modalities=missing)
    return report.model_dump(mode="json")


def _segment(checkpoint: str, case_dir: str, out_path: str, threshold: float) -> Dict[str, Any]:
    model = load_checkpoint(checkpoint)
    return {"output": str(segment(model, case_dir, out_path, threshold))}


# MCP Tools
@app.tool("estimate_flops")
async def estimate_flops(config: Optional[Dict[str, Any]] = None,
                         input_shape: Optional[List[int]] = None) -> Dict[str, Any]:
    """
    Count multiply-accumulate FLOPs of an M-Net forward pass.

    Args:
        config: M-Net configuration fields (defaults for anything omitted)
        input_shape: Optional [T, 4, H, W]; defaults to the configured T and image size

    Returns:
        Dictionary with the total and per-module / per-kind breakdowns
    """
    return await run_tool(_flops, config or {}, input_shape)


@app.tool("generate_synthetic")
async def generate_synthetic(out_dir: str, n_cases: int = 8, depth: int = 30, size: int = 160,
                             seed: int = 0) -> Dict[str, Any]:
    """
    Write synthetic multi-modal cases with drifting lesions as NIfTI files.

    Args:
        out_dir: Directory that receives one sub-directory per case
        n_cases: Number of cases (default: 8)
        depth: Slices per case (default: 30)
        size: Height and width of each slice (default: 160)
        seed: Generator seed (default: 0)

    Returns:
        Dictionary with the written case directories
    """
    return await run_tool(_synth, n_cases, (depth, size, size), seed, str(Path(out_dir)))


@app.tool("evaluate_checkpoint")
async def evaluate_checkpoint(checkpoint: str, data_dir: str, missing_modalities: Optional[List[str]] = None,
                              threshold: float = 0.5) -> Dict[str, Any]:
    """
    Evaluate a checkpoint on every case under a data directory.

    Args:
        checkpoint: Path of a meshcast checkpoint
        data_dir: Directory of case sub-directories
        missing_modalities: Modalities to zero before inference, e.g. ["t1", "t2"]
        threshold: Binarization threshold on sigmoid outputs (default: 0.5)

    Returns:
        Dictionary with per-case and mean Dice / HD95 per region
    """
    return await run_tool(_evaluate, checkpoint, data_dir, list(missing_modalities or []), threshold)


@app.tool("segment_volume")
async def segment_volume(checkpoint: str, case_dir: str, out_path: str, threshold: float = 0.5) -> Dict[str, Any]:
    """
    Segment one case and write a NIfTI label volume (0, 1, 2, 4).

    Args:
        checkpoint: Path of a meshcast checkpoint
        case_dir: Case directory holding the four modality files
        out_path: Output file (.nii or .nii.gz)
        threshold: Binarization threshold on sigmoid outputs (default: 0.5)

    Returns:
        Dictionary with the output path
    """
    return await run_tool(_segment, checkpoint, case_dir, out_path, threshold)


if __name__ == "__main__":
    # Initialize and run the server
    app.run(transport='stdio')
