"""Bind code, style, layout description, and screenshot into complete
instances, and export them in the training-data recipes.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from PIL import Image

from .errors import AssembleError, ExportError, GatewayError, ResponseParseError

STATUS_DRAFT = "draft"
STATUS_COMPLETE = "complete"

RECIPES = ("IC", "C", "middle", "multi_image")

MIN_DESCRIPTION_WORDS = 40

# Reference corpus sizes from the original large-scale runs; reported in
# stats output as metadata, never asserted by any test.
REFERENCE_SCALE = {"evolution": 164_860, "waterfall": 175_485, "additive": 69_458}


@dataclass
class SynthesizedInstance:
    id: str
    strategy: str  # evolution | waterfall | additive | seed
    component_code: str
    style_code: str
    task_description: str = ""
    layout_description: str = ""
    screenshot_hash: str = ""
    lineage: dict = field(default_factory=dict)
    no_style: bool = False
    status: str = STATUS_DRAFT

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def is_complete(self) -> bool:
        return self.status == STATUS_COMPLETE


@dataclass
class MultiImageEntry:
    image_1: str  # screenshot hash of the earlier version
    style_1: str
    component_1: str
    image_2: str  # screenshot hash of the updated version
    target_style: str
    target_component: str
    prompt_text: str
    code_only_diff: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


# --- training formats -------------------------------------------------------

MIDDLE_PROMPT = """Analyze the provided image of a webpage screenshot. Infer the task description that would be required to create this image, and describe the observed layout of its components.
### Input Image:
{image}

### Response:
"""

IC_PROMPT = """Below is an image of the page we want to create. Generate React code to replicate the design, including layout, typography, and styling. Also provide a layout description. Format your response as follows:
'// Layout Description\\n[Describe component layout]\\n\\n// CSS\\n[CSS/SCSS code]\\n\\n// [React Implementation (JS/TS/JSX/TSX)]\\n[Component code]'.

### Input Image:
{image}

### Response:
"""

C_PROMPT = """Below is an image of the page to create. Generate React code and styles to replicate the design, including layout, typography, and styling. Format your response as follows:'// CSS\\n[CSS/SCSS code]\\n\\n// [React Implementation (JS/TS/JSX/TSX)]\\n[Component code]'.

### Input Image:
{image}

### Response:
"""

MULTI_IMAGE_PROMPT = """Analyze two provided images: one showing a webpage (image_1) and another showing its modified version (image_2). Identify visual differences, such as layout, content, or style changes. Based on the provided code snippet for image_1, generate an updated code snippet that reflects the modifications seen in image_2.
Format your response as follows:'// CSS\\n[CSS/SCSS code]\\n\\n// [React Implementation (JS/TS/JSX/TSX)]\\n[Component code]'.

### image_1:
{image_1}

image_2:
{image_2}

###code snippet for image_1:
{css_code_for_image_1}

{imp_code_for_image_1}

### Response:
"""

CSS_HEAD = "// CSS\n"
IMPL_HEAD = "\n\n// [React Implementation (JS/TS/JSX/TSX)]\n"
DESC_HEAD = "// Layout Description\n"


def render_code_target(style_code: str, component_code: str) -> str:
    return f"{CSS_HEAD}{style_code}{IMPL_HEAD}{component_code}"


def render_ic_target(description: str, style_code: str, component_code: str) -> str:
    return f"{DESC_HEAD}{description}\n\n{render_code_target(style_code, component_code)}"


def render_middle_target(task_description: str, layout_description: str) -> str:
    return f"[Task description]:\n{task_description}\n\n[Layout description]:\n{layout_description}"


def parse_code_target(target: str) -> tuple[str, str]:
    """Invert render_code_target; byte-exact for both parts."""
    if not target.startswith(CSS_HEAD):
        raise ExportError("target does not start with the CSS head")
    rest = target[len(CSS_HEAD):]
    split = rest.find(IMPL_HEAD)
    if split == -1:
        raise ExportError("target lacks the implementation head")
    return rest[:split], rest[split + len(IMPL_HEAD):]


# --- layout descriptions ------------------------------------------------------


def decode_image(data: bytes) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
        return img
    except Exception as exc:
        raise AssembleError(f"screenshot does not decode: {exc}") from exc


def describe_layout(
    screenshot: bytes,
    component_code: str,
    style_code: str,
    gateway,
    min_words: int = MIN_DESCRIPTION_WORDS,
) -> str:
    """One free-text description conditioned on both the screenshot and the
    code; below the length floor we reprompt once, then fail."""
    if not component_code.strip():
        raise AssembleError("component code must be non-empty")
    decode_image(screenshot)
    variables = {
        "component_code": component_code,
        "style_code": style_code,
        "image": "<image_1>",
    }
    reminder = None
    for _attempt in range(2):
        try:
            exchange = gateway.complete(
                "layout_description", variables, images=[screenshot], reminder=reminder
            )
        except (GatewayError, ResponseParseError) as exc:
            raise AssembleError(f"description generation failed: {exc}") from exc
        text = str(exchange.parsed).strip()
        if len(text.split()) >= min_words:
            return text
        reminder = (
            f"Reminder: the description must be at least {min_words} words of "
            "continuous prose."
        )
    raise AssembleError(
        f"description stayed under {min_words} words after a reprompt"
    )


def assemble(
    draft: SynthesizedInstance, outcome, description: str
) -> SynthesizedInstance:
    """Mark a draft complete once its render succeeded and its description
    exists; refuses incomplete inputs."""
    if outcome.status != "success":
        raise AssembleError(f"render outcome is {outcome.status}, not success")
    if not outcome.screenshot_hash:
        raise AssembleError("success outcome lacks a screenshot hash")
    if not description.strip():
        raise AssembleError("layout description is empty")
    if not draft.component_code.strip():
        raise AssembleError("component code is empty")
    if not draft.style_code.strip() and not draft.no_style:
        raise AssembleError("style code is empty without the no-style marker")
    draft.layout_description = description.strip()
    draft.screenshot_hash = outcome.screenshot_hash
    draft.status = STATUS_COMPLETE
    return draft


# --- export -------------------------------------------------------------------


def _image_ref(digest: str) -> str:
    return f"images/{digest}.png"


def _export_image(store, digest: str, out_dir: Path) -> None:
    path = out_dir / _image_ref(digest)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not path.exists():
        path.write_bytes(store.get(digest))


def export_dataset(
    instances: list[SynthesizedInstance],
    recipe: str,
    out_dir: str | Path,
    store,
    multi_entries: list[MultiImageEntry] | None = None,
) -> dict:
    """Write dataset/<strategy>/<recipe>.jsonl plus index.json and image
    files by hash. Aborts listing offenders when an incomplete instance
    slips in."""
    if recipe not in RECIPES:
        raise ExportError(f"unknown recipe {recipe!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written: dict[str, int] = {}
    if recipe == "multi_image":
        entries = multi_entries or []
        if not entries:
            raise ExportError("multi_image export needs derived entries")
        path = out_dir / "multi_image" / "multi_image.jsonl"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for entry in entries:
                _export_image(store, entry.image_1, out_dir)
                _export_image(store, entry.image_2, out_dir)
                record = {
                    "prompt": entry.prompt_text,
                    "target": render_code_target(entry.target_style, entry.target_component),
                    "images": [_image_ref(entry.image_1), _image_ref(entry.image_2)],
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        written["multi_image/multi_image.jsonl"] = len(entries)
    else:
        offenders = [i.id for i in instances if not i.is_complete]
        if offenders:
            raise ExportError(
                f"{len(offenders)} incomplete instance(s): {', '.join(offenders[:10])}",
                offenders=offenders,
            )
        by_strategy: dict[str, list[SynthesizedInstance]] = {}
        for inst in instances:
            by_strategy.setdefault(inst.strategy, []).append(inst)
        for strategy, group in sorted(by_strategy.items()):
            path = out_dir / strategy / f"{recipe}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8") as fh:
                for inst in group:
                    _export_image(store, inst.screenshot_hash, out_dir)
                    image_ref = _image_ref(inst.screenshot_hash)
                    if recipe == "C":
                        prompt = C_PROMPT.format(image=image_ref)
                        target = render_code_target(inst.style_code, inst.component_code)
                    elif recipe == "IC":
                        prompt = IC_PROMPT.format(image=image_ref)
                        target = render_ic_target(
                            inst.layout_description, inst.style_code, inst.component_code
                        )
                    else:  # middle
                        prompt = MIDDLE_PROMPT.format(image=image_ref)
                        target = render_middle_target(
                            inst.task_description or inst.layout_description,
                            inst.layout_description,
                        )
                    record = {
                        "id": inst.id,
                        "prompt": prompt,
                        "target": target,
                        "images": [image_ref],
                    }
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
            written[f"{strategy}/{recipe}.jsonl"] = len(group)

    index_path = out_dir / "index.json"
    index = {}
    if index_path.exists():
        index = json.loads(index_path.read_text(encoding="utf-8"))
    index.setdefault("files", {}).update(written)
    index_path.write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
    return written


def dataset_stats(instances: list[SynthesizedInstance]) -> dict:
    by_strategy: dict[str, int] = {}
    by_status: dict[str, int] = {}
    for inst in instances:
        by_strategy[inst.strategy] = by_strategy.get(inst.strategy, 0) + 1
        by_status[inst.status] = by_status.get(inst.status, 0) + 1
    return {
        "total": len(instances),
        "by_strategy": by_strategy,
        "by_status": by_status,
        "reference_scale": dict(REFERENCE_SCALE),
    }
