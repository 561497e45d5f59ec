# Tests for semattack
