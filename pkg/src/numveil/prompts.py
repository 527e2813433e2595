"""Prompt text assets and message builders.

The solver, rewriter, and judge prompts are frozen text: downstream behavior
(code-fence parsing, `<rewritten>` tag parsing, yes/no parsing) depends on
their exact wording, so edit with care and keep the parsers in sync. The
few-shot demonstrations are synthetic and deliberately boring; nothing in
them comes from any real document.
"""

from __future__ import annotations

from .clients import ChatMessage

__all__ = [
    "CODE_SOLVER_SYSTEM",
    "CODE_SOLVER_TASK",
    "REWRITER_SYSTEM",
    "REWRITER_TASK",
    "JUDGE_PROMPT",
    "SOLVER_DEMOS",
    "REWRITER_DEMOS",
    "build_solver_messages",
    "build_rewriter_messages",
    "build_judge_messages",
]

CODE_SOLVER_SYSTEM = (
    "You are a helpful assistant. Given the context and the problem, you need "
    "to write Python code to solve the problem. Your solution should follow "
    "task instructions."
)

CODE_SOLVER_TASK = """Task instruction:
Each sentence in the context is numbered starting with [Sentence id]. Your task is to read the given context and write Python code with accompanying comments to solve the question. The Python solution must be enclosed within a code block that starts with the tag ```python and ends with the tag ```.

Requirements:
1, Break the question down into as many detailed steps as possible.
1, In your code comments, specify the type of each step, describe the subtask, and reference the relevant sentence number from the context or provide logical reasons.
2, Step Type: Indicate whether the step is a [retrieval step] or a [logical step].
3, Retrieval Steps: Indicate all the related sentence number for retrieval with format [Sentence id], [Sentence id].
4, If the retrieved object involves comparison across several candidate sentences, you must NOT directly output the final answer to the retrieval. You need to make sure to list all relevant sentences before outputting the final retrieved objects.
5, Logical Steps: Provide the reason or logic behind the decision or action in the code.
6, Precision: Retain the full precision of the final result without rounding or truncating decimals.
7, Naming Conventions: Python variable names must not start with a number."""

REWRITER_SYSTEM = (
    "You are a helpful assistant. Rewrite the context and the question "
    "according to the following task instruction and requirements."
)

REWRITER_TASK = """Task instruction:
Given the context and question, replace the entities and important nouns in a different topic while keeping the numerical values unchanged.
Requirements:
1. Change the topic of the context. For example, if the current topic is the water consumption, change it to other topics such as the automobile factory or the medicine.
2. Replace important nouns, e.g. securities, issuance, equity compensation plans with general or new-topic-related nouns.
3. Maintain the numerical values unchanged.
4. Maintain the format and logic unchanged.
5. Ensure that every sentence is rewritten. Do not omit or hide any of them. The number of sentences in the output should match the number provided by the user, without omitting anyone.
6. Directly output the rewritten context and question within the tag <rewritten> and </rewritten>. Don't include unrelated information in within the tags."""

JUDGE_PROMPT = (
    "Given context A and context B, determine whether context B uses "
    "information from context A. Ignore table formats and sentence "
    "structures; If they share some similar important nouns, it can be "
    "considered that context B uses information from context A. Respond "
    "directly with Yes or No."
)

_DEMO_RESERVOIR_IN = """Context:
[Sentence 0]: The annual report summarizes reservoir operations across the region.
[Sentence 1]: Reservoir inflow of For the years ended December 31, 2019 is 840 .
[Sentence 2]: Reservoir inflow of For the years ended December 31, 2020 is 910 .

Question: How much did the Reservoir inflow increase from 2019 to 2020?"""

_DEMO_RESERVOIR_OUT = """```python
# Step 1, [retrieval step] Retrieve the reservoir inflow amounts for both years
# evidence from the original context: [Sentence 1], [Sentence 2]
inflow_2019 = 840
inflow_2020 = 910

# Step 2, [logical step] The increase is the later amount minus the earlier amount
increase = inflow_2020 - inflow_2019
```"""

_DEMO_SHIPMENTS_IN = """Context:
[Sentence 0]: The plant review covers assembly output for recent periods.
[Sentence 3]: Robot shipments of For the years ended December 31, 2021 is 64 .
[Sentence 5]: Robot shipments of For the years ended December 31, 2022 is 80 .

Question: What is the growth rate of Robot shipments in 2022?"""

_DEMO_SHIPMENTS_OUT = """```python
# Step 1, [retrieval step] Retrieve the robot shipment amounts for 2022 and the previous year
# evidence from the original context: [Sentence 3], [Sentence 5]
shipments_2022 = 80
shipments_2021 = 64

# Step 2, [logical step] Growth Rate = (Current Year Amount - Previous Year Amount) / Previous Year Amount
growth_rate = (shipments_2022 - shipments_2021) / shipments_2021
```"""

_DEMO_CATALOG_IN = """Context:
[Sentence 1]: Paperback sales of the spring catalog is 350 .
[Sentence 4]: Hardcover sales of the spring catalog is 125 .

Question: What is the total of Paperback sales and Hardcover sales?"""

_DEMO_CATALOG_OUT = """```python
# Step 1, [retrieval step] Retrieve both sales amounts from the catalog
# evidence from the original context: [Sentence 1], [Sentence 4]
paperback_sales = 350
hardcover_sales = 125

# Step 2, [logical step] The total is the sum of the two retrieved amounts
total_sales = paperback_sales + hardcover_sales
```"""

SOLVER_DEMOS: tuple[tuple[str, str], ...] = (
    (_DEMO_RESERVOIR_IN, _DEMO_RESERVOIR_OUT),
    (_DEMO_SHIPMENTS_IN, _DEMO_SHIPMENTS_OUT),
    (_DEMO_CATALOG_IN, _DEMO_CATALOG_OUT),
)

_DEMO_REWRITE_IN = """Context:
[Sentence 0]: The annual report summarizes reservoir operations across the region.
[Sentence 1]: Reservoir inflow of For the years ended December 31, 2019 is 840 .
[Sentence 2]: Reservoir inflow of For the years ended December 31, 2020 is 910 .

Question: How much did the Reservoir inflow increase from 2019 to 2020?"""

_DEMO_REWRITE_OUT = """<rewritten>
Context:
[Sentence 0]: The quarterly digest summarizes greenhouse operations across the district.
[Sentence 1]: Greenhouse harvest of For the years ended December 31, 2019 is 840 .
[Sentence 2]: Greenhouse harvest of For the years ended December 31, 2020 is 910 .

Question: How much did the Greenhouse harvest increase from 2019 to 2020?
</rewritten>"""

REWRITER_DEMOS: tuple[tuple[str, str], ...] = (
    (_DEMO_REWRITE_IN, _DEMO_REWRITE_OUT),
)


def solver_user_message(context: str, question: str) -> str:
    return f"Context:\n{context}\n\nQuestion: {question}"


def build_solver_messages(
    context: str,
    question: str,
    demos: tuple[tuple[str, str], ...] = SOLVER_DEMOS,
) -> tuple[ChatMessage, ...]:
    messages = [ChatMessage("system", f"{CODE_SOLVER_SYSTEM}\n\n{CODE_SOLVER_TASK}")]
    for demo_in, demo_out in demos:
        messages.append(ChatMessage("user", demo_in))
        messages.append(ChatMessage("assistant", demo_out))
    messages.append(ChatMessage("user", solver_user_message(context, question)))
    return tuple(messages)


def build_rewriter_messages(
    serialized_query: str,
    history: tuple[tuple[str, str], ...] = (),
    demos: tuple[tuple[str, str], ...] = REWRITER_DEMOS,
) -> tuple[ChatMessage, ...]:
    """Rewriter conversation; ``history`` holds (bad reply, feedback) turns."""
    messages = [ChatMessage("system", f"{REWRITER_SYSTEM}\n\n{REWRITER_TASK}")]
    for demo_in, demo_out in demos:
        messages.append(ChatMessage("user", demo_in))
        messages.append(ChatMessage("assistant", demo_out))
    messages.append(ChatMessage("user", serialized_query))
    for bad_reply, feedback in history:
        messages.append(ChatMessage("assistant", bad_reply))
        messages.append(ChatMessage("user", feedback))
    return tuple(messages)


def build_judge_messages(context_a: str, context_b: str) -> tuple[ChatMessage, ...]:
    return (
        ChatMessage(
            "user",
            f"{JUDGE_PROMPT}\n\nContext A:\n{context_a}\n\nContext B:\n{context_b}",
        ),
    )


# Baseline-only prompts. These implement the comparison protocols, not the
# protected path, so they are deliberately plain.

HINT_DESCRIBE_PROMPT = (
    "Describe what kind of problem this is and what must be computed, in one "
    "or two sentences. Do not include any numbers, names, or other specifics "
    "from the context."
)

HINT_REMOTE_SYSTEM = (
    "You are a helpful assistant. Given a problem description, provide a "
    "short high-level hint on the general solution approach. Do not ask for "
    "more data."
)

EXAMPLE_REPHRASE_PROMPT = (
    "Rewrite the following context and question about a different subject, "
    "concealing the sensitive information: replace the topic, the important "
    "nouns, and every numerical value with different ones. Keep the overall "
    "structure. Output only the rewritten context and question."
)


def build_hint_describe_messages(context: str, question: str) -> tuple[ChatMessage, ...]:
    return (
        ChatMessage("system", HINT_DESCRIBE_PROMPT),
        ChatMessage("user", solver_user_message(context, question)),
    )


def build_hint_request_messages(description: str) -> tuple[ChatMessage, ...]:
    return (
        ChatMessage("system", HINT_REMOTE_SYSTEM),
        ChatMessage("user", description),
    )


def build_solver_messages_with_hint(
    context: str, question: str, hint: str
) -> tuple[ChatMessage, ...]:
    messages = list(build_solver_messages(context, question))
    messages[-1] = ChatMessage(
        "user", f"{messages[-1].content}\n\nHint: {hint}"
    )
    return tuple(messages)


def build_example_rephrase_messages(serialized_query: str) -> tuple[ChatMessage, ...]:
    return (
        ChatMessage("system", EXAMPLE_REPHRASE_PROMPT),
        ChatMessage("user", serialized_query),
    )


def build_solver_messages_with_reference(
    context: str, question: str, reference: str
) -> tuple[ChatMessage, ...]:
    messages = list(build_solver_messages(context, question))
    messages[-1] = ChatMessage(
        "user",
        f"{messages[-1].content}\n\nA worked solution to a similar problem, "
        f"for reference:\n{reference}",
    )
    return tuple(messages)
