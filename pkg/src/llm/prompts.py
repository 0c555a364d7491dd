"""
Age-specific system prompts and per-case user messages.

The base template carries {age_group}, {age_group_upper}, {cod_list},
{age_specific_guidance} and {examples}; texts live in llm/resources.
"""
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import List, Mapping, Optional, Sequence, Tuple

from ..core.codebook import CauseCodebook
from ..core.errors import ValidationError
from ..core.models import AgeGroup, Sex, SymptomAnswer, VARecord

PLACEHOLDER = re.compile(r'\{([a-z_]+)\}')
LABEL_SEPARATOR = '; '


@dataclass(frozen=True)
class PromptTemplate:
    """Base prompt plus the guidance and few-shot blocks for one age group."""

    age_group: AgeGroup
    base_text: str
    guidance: str
    examples: str

    def render(self, codebook: CauseCodebook) -> str:
        """Instantiate the system prompt; inserted text is not re-scanned for placeholders."""
        if codebook.age_group is not self.age_group:
            raise ValidationError(
                f"Template is for {self.age_group.value}, codebook is for {codebook.age_group.value}"
            )
        values = {
            'age_group': self.age_group.value,
            'age_group_upper': self.age_group.plural.upper(),
            'cod_list': LABEL_SEPARATOR.join(codebook.labels),
            'age_specific_guidance': self.guidance.strip(),
            'examples': self.examples.strip(),
        }
        text = PLACEHOLDER.sub(lambda m: values.get(m.group(1), m.group(0)), self.base_text)
        leftover = unresolved_placeholders(text)
        if leftover:
            raise ValidationError(f"Unresolved prompt placeholders: {leftover}")
        return text


def unresolved_placeholders(text: str) -> List[str]:
    return PLACEHOLDER.findall(text)


def _resource(name: str) -> str:
    return resources.files(__package__).joinpath('resources').joinpath(name).read_text(encoding='utf-8')


@lru_cache(maxsize=None)
def load_template(age_group) -> PromptTemplate:
    """Shipped template for an age group."""
    group = age_group if isinstance(age_group, AgeGroup) else AgeGroup.parse(age_group)
    return PromptTemplate(
        age_group=group,
        base_text=_resource('base_prompt.txt'),
        guidance=_resource(f"{group.value}_guidance.txt"),
        examples=_resource(f"{group.value}_examples.txt"),
    )


def _demographics(record: VARecord) -> str:
    sex = 'sex unknown' if record.sex is Sex.UNKNOWN else record.sex.value
    return f"{record.age_value:g}-{record.age_group.age_unit} {sex}, {record.site}"


def _question_text(question: str, symptom_labels: Optional[Mapping[str, str]]) -> str:
    if symptom_labels and question in symptom_labels:
        return symptom_labels[question]
    return question


def build_prompt(
    record: VARecord,
    codebook: CauseCodebook,
    template: PromptTemplate,
    care_access_fields: Sequence[str] = (),
    symptom_labels: Optional[Mapping[str, str]] = None,
) -> Tuple[str, str]:
    """
    Build the (system, user) message pair for one record.

    Args:
        record: Case to code
        codebook: Codebook of the record's age group
        template: Template of the same age group
        care_access_fields: Symptom ids rendered as CARE ACCESS instead of QUESTIONNAIRE
        symptom_labels: Optional question text per symptom id

    Returns:
        (system text, user text); a pure function of its inputs
    """
    if record.age_group is not template.age_group:
        raise ValidationError(
            f"Record {record.id} is {record.age_group.value}; template is {template.age_group.value}"
        )
    system = template.render(codebook)

    care_lines = []
    positives, negatives = [], []
    for question, answer in record.symptoms.items():
        if answer is SymptomAnswer.MISSING:
            continue
        text = _question_text(question, symptom_labels)
        if question in care_access_fields:
            care_lines.append(f"{text}: {answer.value}")
        elif answer is SymptomAnswer.YES:
            positives.append(text)
        else:
            negatives.append(text)

    questionnaire = ', '.join(positives) if positives else 'no symptoms reported'
    if negatives:
        questionnaire += '; denied: ' + ', '.join(negatives)

    lines = [f"DEMOGRAPHICS: {_demographics(record)}"]
    if care_lines:
        lines.append(f"CARE ACCESS: {'; '.join(care_lines)}")
    lines.append(f"QUESTIONNAIRE: {questionnaire}")
    narrative = record.narrative.strip() if record.narrative else '(no narrative recorded)'
    lines.append(f"NARRATIVE: \"{narrative}\"" if record.narrative else f"NARRATIVE: {narrative}")
    return system, '\n'.join(lines)


def cod_list_entries(system_text: str, codebook: CauseCodebook) -> Sequence[str]:
    """Labels listed under the ALLOWED CAUSES header of an instantiated prompt."""
    header = f"ALLOWED CAUSES FOR {codebook.age_group.plural.upper()}:"
    lines = system_text.split('\n')
    for i, line in enumerate(lines):
        if line.strip() == header and i + 1 < len(lines):
            return lines[i + 1].split(LABEL_SEPARATOR)
    return []

