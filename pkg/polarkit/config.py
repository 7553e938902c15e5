from dataclasses import dataclass, asdict, field, fields
from pathlib import Path
from typing import List, Optional
import json
import os
import sys

SETTINGS_FILE = "polarkit_settings.json"
CRASH_LOG_FILE = "crash.log"


def app_root() -> Path:
    """Directory for writable app files.

    ``POLARKIT_HOME`` wins when set; a frozen build uses the folder next to
    the executable; otherwise the repo root.
    """
    env = os.environ.get("POLARKIT_HOME")
    if env:
        return Path(env)
    if getattr(sys, "frozen", False):
        try:
            exe_dir = Path(sys.executable).resolve().parent
            if exe_dir.exists():
                return exe_dir
        except Exception:
            pass
    return Path(__file__).resolve().parents[1]


def user_file(name: str) -> Path:
    return app_root() / name


def ensure_parent(path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except Exception:
        pass
    return path


@dataclass
class Settings:
    # Upper-bound sweep
    n_list: List[int] = field(default_factory=lambda: [18, 24, 36, 72, 90, 120])
    center_mode: str = "mass"
    raster_size: int = 256
    bbox_inflate: float = 0.05
    # Contour sampling for encoding (pixels)
    max_step: float = 0.5
    # Center sampling
    strides: List[int] = field(default_factory=lambda: [8, 16, 32, 64, 128])
    radius_multiplier: float = 1.5
    # Test-time assembly; text-detection setting of NMS 0.3 / score 0.25
    nms_iou_threshold: float = 0.3
    score_threshold: float = 0.25
    top_k: int = 1000
    class_aware: bool = True
    # Loss check
    losscheck_n: int = 36
    losscheck_trials: int = 50
    losscheck_steps: int = 200
    losscheck_lr: float = 0.25
    smooth_l1_beta: float = 1.0
    smooth_l1_alphas: List[float] = field(default_factory=lambda: [0.05, 0.30, 1.00])
    seed: int = 0
    workers: int = 1

    def center_sample_config(self):
        from .scoring import CenterSampleConfig

        return CenterSampleConfig(list(self.strides), float(self.radius_multiplier))


def settings_path() -> Path:
    return user_file(SETTINGS_FILE)


def load_settings(path: Optional[Path] = None) -> Settings:
    p = Path(path) if path is not None else settings_path()
    try:
        if p.exists():
            data = json.loads(p.read_text(encoding="utf-8"))
            # Ignore unknown keys to remain forward/backward compatible
            allowed = {f.name for f in fields(Settings)}
            filtered = {k: v for k, v in (data or {}).items() if k in allowed}
            return Settings(**filtered)
    except Exception:
        # Corrupt or incompatible; start from defaults
        pass
    return Settings()


def save_settings(settings: Settings, path: Optional[Path] = None) -> Path:
    p = ensure_parent(Path(path) if path is not None else settings_path())
    p.write_text(json.dumps(asdict(settings), ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return p
