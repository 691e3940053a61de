# симуляция испытаний и калибровка
