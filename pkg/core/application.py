# core/application.py
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from core.errors import ConfigError
from core.managers.config_manager import RunConfig
from core.managers.service_manager import ServiceManager
from core.models.cohort import CohortTree
from core.models.dataset import Dataset
from core.storage import load_dataset, read_jsonl, run_meta, save_dataset, write_json
from event_bus import EventBus
from events import StageFinished, StageStarted
from services import CommandHandler
from services.cohort_service import TREE_FILE
from services.evaluation_service import REPORT_FILE
from services.pattern_service import PATTERNS_FILE, PatternBook
from services.synth_service import load_synth_spec

logger = logging.getLogger(__name__)

SOURCE_DIR = "source"
GENERATED_DIR = "generated"
INGEST_REPORT_FILE = "ingest_report.json"
REPORT_TEXT_FILE = "report.txt"


class Application:
    """
    Runs one subcommand end to end over a single RunConfig. Every artifact
    it writes carries the config hash and the run seed.
    """

    def __init__(self, config: RunConfig, event_bus: Optional[EventBus] = None):
        self.config = config
        self.event_bus = event_bus or EventBus()
        self.service_manager = ServiceManager(self.event_bus, config)
        self.command_handler: Optional[CommandHandler] = None
        self.meta = run_meta(config.config_hash(), config.run_seed)
        self._initialization_complete = False

    @property
    def out(self) -> Path:
        return self.config.output_dir

    def initialize(self):
        if self._initialization_complete:
            return
        self.out.mkdir(parents=True, exist_ok=True)
        self.service_manager.initialize_core_components()
        self.service_manager.initialize_services()
        self.command_handler = CommandHandler(self, self.event_bus)
        self._initialization_complete = True
        logger.info(f"[Application] Initialized; writing to {self.out}")

    async def run(self, subcommand: str) -> List[Path]:
        self.initialize()
        try:
            return await self.command_handler.handle(subcommand)
        finally:
            await self.shutdown()

    async def shutdown(self):
        await self.service_manager.shutdown()

    # --- artifact locations ---

    def _input(self, configured: Optional[str], default: Path, what: str) -> Path:
        path = self.config.resolve(configured) if configured else default
        if not path.exists():
            raise ConfigError(f"No {what} at {path}; run the producing subcommand first or set it in the config",
                              path=str(path))
        return path

    def source_dataset(self) -> Dataset:
        return load_dataset(self._input(self.config.paths.source_dataset, self.out / SOURCE_DIR, "source dataset"))

    def generated_dataset(self) -> Dataset:
        return load_dataset(self._input(self.config.paths.generated_dataset, self.out / GENERATED_DIR,
                                        "generated dataset"))

    def cohort_tree(self) -> CohortTree:
        _, records = read_jsonl(self._input(self.config.paths.cohort_tree, self.out / TREE_FILE, "cohort tree"))
        return CohortTree.from_records(records)

    def pattern_book(self) -> PatternBook:
        return PatternBook.load(self._input(self.config.paths.patterns, self.out / PATTERNS_FILE, "patterns file"))

    # --- stages ---

    async def stage(self, name: str, runner) -> List[Path]:
        self.event_bus.emit("stage_started", StageStarted(name))
        artifacts = await runner()
        self.event_bus.emit("stage_finished", StageFinished(name, [str(p) for p in artifacts]))
        return artifacts

    async def ingest(self) -> List[Path]:
        paths = self.config.paths
        if not paths.survey_profiles or not paths.survey_trips:
            raise ConfigError("ingest needs paths.survey_profiles and paths.survey_trips",
                              keys=["paths.survey_profiles", "paths.survey_trips"])
        service = self.service_manager.survey_ingest_service
        dataset = service.load_survey(self.config.resolve(paths.survey_profiles),
                                      self.config.resolve(paths.survey_trips), strict=self.config.ingest.strict)
        written = save_dataset(dataset, self.out / SOURCE_DIR, self.meta)
        report = {"meta": self.meta, **service.last_report.to_dict()}
        written.append(write_json(self.out / INGEST_REPORT_FILE, report))
        return written

    async def synth(self) -> List[Path]:
        if not self.config.paths.synth_spec:
            raise ConfigError("synth needs paths.synth_spec", keys=["paths.synth_spec"])
        spec = load_synth_spec(self.config.resolve(self.config.paths.synth_spec))
        anchor = self.service_manager.get_anchor() if spec.anchor_to_network else None
        dataset = self.service_manager.synth_service.synth_dataset(spec, anchor)
        return save_dataset(dataset, self.out / SOURCE_DIR, self.meta)

    async def cohort(self) -> List[Path]:
        service = self.service_manager.cohort_service
        tree = await service.refine_hierarchy(self.source_dataset())
        return service.write_tree(tree, self.out, self.meta)

    async def patterns(self) -> List[Path]:
        service = self.service_manager.pattern_service
        patterns = await service.build_patterns(self.source_dataset(), self.cohort_tree())
        return [service.write_patterns(patterns, self.out, self.meta)]

    async def generate(self) -> List[Path]:
        source = self.source_dataset()
        tree = self.cohort_tree() if self.config.generation.mode == "sample" else None
        profiles, days = self.service_manager.population_service.target(source, self.config.generation, tree)
        reasoner = self.service_manager.get_reasoner()
        generated = await reasoner.generate_population(profiles, days, self.pattern_book())
        return save_dataset(generated, self.out / GENERATED_DIR, self.meta)

    async def evaluate(self) -> List[Path]:
        return self.service_manager.evaluation_service.run(self.source_dataset(), self.generated_dataset(),
                                                           self.out, self.meta)

    async def report(self) -> List[Path]:
        sections: Dict[str, Any] = {"source": self.source_dataset()}
        for key, loader in (("generated", self.generated_dataset), ("tree", self.cohort_tree),
                            ("patterns", self.pattern_book)):
            try:
                sections[key] = loader()
            except ConfigError:
                sections[key] = None
        evaluation = None
        if (self.out / REPORT_FILE).exists():
            evaluation = json.loads((self.out / REPORT_FILE).read_text(encoding="utf-8"))
        text = self.service_manager.evaluation_service.render_report(
            sections["source"], sections["generated"], sections["tree"],
            sections["patterns"].patterns if sections["patterns"] else None, evaluation, self.meta)
        path = self.out / REPORT_TEXT_FILE
        path.write_text(text, encoding="utf-8")
        print(text)
        return [path]

    async def pipeline(self) -> List[Path]:
        first = "synth" if self.config.paths.synth_spec else "ingest"
        artifacts: List[Path] = []
        for name in (first, "cohort", "patterns", "generate", "evaluate", "report"):
            artifacts += await self.stage(name, getattr(self, name))
        return artifacts

    def is_fully_initialized(self) -> bool:
        return self._initialization_complete and self.service_manager.is_fully_initialized()
