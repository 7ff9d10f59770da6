from langgraph.graph import StateGraph, START, END

from src.nodes.candidates import taylor_candidates_node
from src.nodes.engines import make_engine_node
from src.nodes.tabulate import tabulate_node
from src.state import CompareState

ENGINE_NODES = {
    "taylor": "Taylor",
    "laplace": "Laplace",
    "ep": "EP",
    "kld": "KLD",
}

builder = StateGraph(CompareState)

# --- Shared Taylor-stage candidates ---
builder.add_node("TaylorCandidates", taylor_candidates_node)

# --- Engines ---
for engine, name in ENGINE_NODES.items():
    builder.add_node(name, make_engine_node(engine))

# --- Synchronization node ---
builder.add_node("Tabulate", tabulate_node)

# --- Edges / flow ---
builder.add_edge(START, "TaylorCandidates")

# Fan-out: TaylorCandidates -> four engines
for name in ENGINE_NODES.values():
    builder.add_edge("TaylorCandidates", name)

# Fan-in: all engines -> Tabulate
for name in ENGINE_NODES.values():
    builder.add_edge(name, "Tabulate")

builder.add_edge("Tabulate", END)

graph = builder.compile()
