class QuasilatticeError(Exception):
    pass

class StructuralError(QuasilatticeError):
    pass

class PreconditionError(QuasilatticeError):
    pass

class SpecParseError(QuasilatticeError):
    pass

class ConsistencyError(QuasilatticeError):
    pass

class TailBoundError(QuasilatticeError):
    pass

class UndefinedResultError(QuasilatticeError):
    pass

class EnumerationLimitError(QuasilatticeError):
    pass

class ObstructedGroupError(QuasilatticeError):
    def __init__(self, prime: int, rank: int, limit: int):
        super().__init__(f"obstructed at p={prime}: p-rank {rank} exceeds m+d={limit}")
        self.prime = prime
        self.rank = rank
        self.limit = limit

class SlotCollisionError(QuasilatticeError):
    def __init__(self, prime: int, slot: int):
        super().__init__(f"two components of prime {prime} assigned to slot {slot}")
        self.prime = prime
        self.slot = slot
