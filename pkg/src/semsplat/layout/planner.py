"""Planner clients: canned fixtures and a generic chat-completion endpoint.

The remote client sends the prompt templates shipped with this package to
any OpenAI-style chat endpoint, parses the JSON it returns, validates it,
and retries (appending the validation diagnostic to the prompt) up to three
times before giving up.
"""
from __future__ import annotations

import json
import os
import re
from importlib import resources

from semsplat.errors import ConfigError, ValidationError
from semsplat.layout.planfile import LayoutPlan, load_plan
from semsplat.layout.regions import RegionTree

MAX_ATTEMPTS = 3
API_KEY_ENV = "PLANNER_API_KEY"


def _load_template(name):
    return resources.files("semsplat.layout").joinpath("templates", name).read_text()


class CannedPlannerClient:
    """Returns a fixture plan regardless of the prompt; deterministic."""

    kind = "canned"

    def __init__(self, fixture_path):
        self.fixture_path = fixture_path

    def plan(self, scene_prompt) -> LayoutPlan:
        plan = load_plan(self.fixture_path)
        plan.execute()  # validates program + trees
        return plan


def extract_json(text):
    """Pull the first JSON object out of a chat response (fenced or bare)."""
    fenced = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
    if fenced:
        text = fenced.group(1)
    start = text.find("{")
    if start < 0:
        raise ValidationError("response contains no JSON object")
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return json.loads(text[start : i + 1])
    raise ValidationError("unbalanced JSON object in response")


class RemotePlannerClient:
    """Chat-completion-backed planner with a validate-and-retry loop."""

    kind = "remote"

    def __init__(self, endpoint, model="gpt-4", api_key=None, timeout=120.0,
                 transport=None):
        if transport is None and api_key is None:
            api_key = os.environ.get(API_KEY_ENV)
            if not api_key:
                raise ConfigError(
                    f"remote planner needs the {API_KEY_ENV} environment variable"
                )
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self._transport = transport or self._http_transport

    def _http_transport(self, prompt):
        import requests

        resp = requests.post(
            self.endpoint,
            headers={"Authorization": f"Bearer {self.api_key}"},
            json={
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
            },
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]

    def _ask_scene(self, scene_prompt, feedback):
        template = _load_template("scene_program.txt")
        return extract_json(
            self._transport(
                template.format(scene_prompt=scene_prompt, feedback=feedback)
            )
        )

    def _ask_regions(self, object_prompt, feedback):
        template = _load_template("object_regions.txt")
        return extract_json(
            self._transport(
                template.format(object_prompt=object_prompt, feedback=feedback)
            )
        )

    def plan(self, scene_prompt) -> LayoutPlan:
        feedback = ""
        last_error = None
        for _ in range(MAX_ATTEMPTS):
            try:
                doc = self._ask_scene(scene_prompt, feedback)
                doc.setdefault("region_trees", {})
                plan = LayoutPlan.from_dict(doc)
                plan.execute()
                break
            except (ValidationError, KeyError, TypeError, ValueError) as err:
                last_error = err
                feedback = f"Your previous answer failed validation: {err}"
        else:
            raise ValidationError(
                f"planner failed after {MAX_ATTEMPTS} attempts: {last_error}"
            )

        trees = {}
        for obj in plan.objects:
            feedback = ""
            for _ in range(MAX_ATTEMPTS):
                try:
                    node = self._ask_regions(obj.prompt, feedback)
                    trees[obj.id] = RegionTree.from_dict(node)
                    break
                except (ValidationError, KeyError, TypeError, ValueError) as err:
                    last_error = err
                    feedback = f"Your previous answer failed validation: {err}"
            else:
                raise ValidationError(
                    f"region planner failed for {obj.id!r} after "
                    f"{MAX_ATTEMPTS} attempts: {last_error}"
                )
        plan.region_trees = trees
        plan.execute()
        return plan
