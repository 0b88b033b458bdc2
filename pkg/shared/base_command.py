import logging
import os
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

from .config import BaseConfig
from .constants import FILE_PATTERNS
from .manifest import write_manifest
from .output_utils import print_run_summary


class BaseCommand(ABC):
    """Base class for the command-line commands."""

    name = ""

    def __init__(self, config: BaseConfig, progress: bool = True):
        """
        Initialize the base command class.

        Args:
            config: Command configuration (output directory, threads)
            progress: Show progress bars
        """
        self.config = config
        self.progress = progress
        self.files: Dict[str, str] = {}
        self.logger = logging.getLogger(self.__class__.__name__)

    @abstractmethod
    def execute(self) -> Dict[str, Any]:
        """
        Do the work and register the written files in ``self.files``.

        Returns:
            Key figures for the console summary
        """

    @abstractmethod
    def manifest_config(self) -> Dict[str, Any]:
        """Plain-JSON configuration recorded in the manifest."""

    def manifest_seed(self) -> Optional[int]:
        return None

    def manifest_extra(self) -> Dict[str, Any]:
        return {}

    def output_path(self, role: str) -> str:
        return os.path.join(self.config.output_directory, FILE_PATTERNS[role])

    def run(self) -> Dict[str, str]:
        """
        Execute, write the manifest and print a summary.

        Returns:
            Dictionary mapping file roles to file paths (manifest included)
        """
        self.config.ensure_output_directory()
        summary = self.execute()
        manifest_path = os.path.join(self.config.output_directory, FILE_PATTERNS["manifest"].format(command=self.name))
        write_manifest(
            manifest_path,
            self.name,
            self.manifest_seed(),
            self.manifest_config(),
            self.files,
            extra=self.manifest_extra(),
        )
        saved_files = {**self.files, "manifest": manifest_path}
        print_run_summary(self.name, summary, saved_files)
        self.logger.info(f"{self.name} finished, {len(saved_files)} files written")
        return saved_files
