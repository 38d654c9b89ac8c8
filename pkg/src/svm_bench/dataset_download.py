"""
Download of the benchmark datasets from the LIBSVM binary collection.

Handles:
- Streaming downloads with retries and a progress bar
- bz2 decompression
- Dimension checks against the published sizes
"""

import bz2
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import requests
from requests.adapters import HTTPAdapter
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential
from tqdm import tqdm
from urllib3.util.retry import Retry

from .libsvm import load_libsvm
from .utils import data_dir, ensure_directory


logger = logging.getLogger(__name__)

BASE_URL = "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary"
CHUNK_SIZE = 8192


@dataclass(frozen=True)
class DatasetSpec:
    """A benchmark dataset with its published dimensions and default delta."""

    name: str
    remote_name: str
    n_samples: int
    n_features: int
    delta: float
    compressed: bool = False

    @property
    def url(self) -> str:
        return f"{BASE_URL}/{self.remote_name}"


DATASETS: Dict[str, DatasetSpec] = {
    "breast-cancer": DatasetSpec("breast-cancer", "breast-cancer", 683, 10, 0.5),
    "sonar_scale": DatasetSpec("sonar_scale", "sonar_scale", 208, 60, 1.0),
    "colon-cancer": DatasetSpec("colon-cancer", "colon-cancer.bz2", 62, 2000, 0.1, True),
}


class DatasetDownloadError(RuntimeError):
    """Raised when a dataset cannot be fetched or fails verification."""

    pass


class DatasetDownloader:
    """Fetches LIBSVM datasets into the data directory."""

    def __init__(
        self, directory: Optional[Path] = None, session: Optional[requests.Session] = None
    ):
        """
        Args:
            directory: Target directory (defaults to $DWIFOB_DATA_DIR)
            session: Preconfigured session, mainly for tests
        """
        self.directory = Path(directory) if directory is not None else data_dir()
        self.session = session or self._build_session()

    @staticmethod
    def _build_session() -> requests.Session:
        session = requests.Session()
        retry_strategy = Retry(
            total=3,
            backoff_factor=1,
            status_forcelist=[429, 500, 502, 503, 504],
            allowed_methods=["GET"],
        )
        adapter = HTTPAdapter(max_retries=retry_strategy)
        session.mount("http://", adapter)
        session.mount("https://", adapter)
        return session

    def target_path(self, spec: DatasetSpec) -> Path:
        return self.directory / spec.name

    @retry(
        retry=retry_if_exception_type(requests.RequestException),
        wait=wait_exponential(multiplier=1, max=30),
        stop=stop_after_attempt(3),
        reraise=True,
    )
    def _fetch(self, url: str, destination: Path, show_progress: bool) -> None:
        logger.debug(f"Making request to: {url}")
        with self.session.get(url, stream=True, timeout=60) as response:
            response.raise_for_status()
            total = int(response.headers.get("content-length", 0)) or None
            with open(destination, "wb") as f, tqdm(
                total=total,
                desc=destination.name,
                unit="B",
                unit_scale=True,
                disable=not show_progress,
                leave=False,
            ) as progress:
                for chunk in response.iter_content(chunk_size=CHUNK_SIZE):
                    if chunk:
                        f.write(chunk)
                        progress.update(len(chunk))

    def verify(self, spec: DatasetSpec, path: Path) -> None:
        """
        Parse the file and compare its dimensions with the published ones.

        Raises:
            DatasetDownloadError: If the sample or feature count differs
        """
        dataset = load_libsvm(path)
        if dataset.n_samples != spec.n_samples or dataset.n_features != spec.n_features:
            raise DatasetDownloadError(
                f"{spec.name}: expected {spec.n_samples}x{spec.n_features}, "
                f"got {dataset.n_samples}x{dataset.n_features}"
            )

    def download(self, name: str, force: bool = False, show_progress: bool = True) -> Path:
        """
        Download one dataset unless it is already present.

        Args:
            name: Key of :data:`DATASETS`
            force: Re-download even when the file exists
            show_progress: Show a byte progress bar

        Returns:
            Path to the uncompressed LIBSVM file

        Raises:
            DatasetDownloadError: On unknown names, network failures or size mismatch
        """
        spec = DATASETS.get(name)
        if spec is None:
            raise DatasetDownloadError(f"Unknown dataset '{name}'; choose from {sorted(DATASETS)}")

        ensure_directory(self.directory)
        target = self.target_path(spec)
        if target.exists() and not force:
            logger.info(f"{spec.name} already present at {target}")
            return target

        logger.info(f"Downloading {spec.url} to {target}")
        partial = target.with_name(target.name + ".part")
        try:
            self._fetch(spec.url, partial, show_progress)
            if spec.compressed:
                raw = partial.read_bytes()
                partial.write_bytes(bz2.decompress(raw))
            self.verify(spec, partial)
            partial.replace(target)
        except requests.RequestException as e:
            raise DatasetDownloadError(f"Failed to fetch {spec.url}: {e}")
        except (OSError, ValueError) as e:
            raise DatasetDownloadError(f"Could not prepare {spec.name}: {e}")
        finally:
            if partial.exists():
                partial.unlink()

        logger.info(f"Successfully downloaded {spec.name} to {target}")
        return target

    def download_all(
        self, names: Optional[List[str]] = None, force: bool = False
    ) -> Dict[str, Path]:
        """Download several datasets; failures are logged and skipped."""
        results: Dict[str, Path] = {}
        names = names or list(DATASETS)
        with tqdm(total=len(names), desc="Downloading datasets", unit="dataset") as progress:
            for name in names:
                try:
                    results[name] = self.download(name, force=force, show_progress=False)
                    progress.set_postfix_str(f"✓ {name}")
                except DatasetDownloadError as e:
                    logger.error(str(e))
                    progress.set_postfix_str(f"✗ {name}")
                progress.update(1)

        logger.info(f"Downloaded {len(results)}/{len(names)} datasets")
        return results
