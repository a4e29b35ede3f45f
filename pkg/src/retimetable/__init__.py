"""Train re-timetabling after a single perturbation.

A permutation of trains is decoded into a schedule by a semi-greedy
insertion scheduler; a (mu + lambda) evolutionary algorithm searches the
permutations. The problem can also be exported as a mixed-integer linear
program together with a warm start built from any feasible schedule.
"""
from .decoder import DecodeResult, DecoderConfig, decode, penalized_fitness
from .model import (Connection, Edge, GateGroup, GateMember, Instance, InstanceError,
                    Node, Perturbation, Route, SpacingTable, Train, apply_perturbation,
                    dumps_instance, load_instance, loads_instance, save_instance)
from .schedule import Schedule, TrainTimes, total_delay
from .validate import Violation, count_constraints, validate_schedule

__version__ = "0.1.0"
